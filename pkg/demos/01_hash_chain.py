"""
Hashing a sulfur reading and catching a rewrite
===============================================

A reading becomes a fixed byte string, then a SHA-256 digest, then an entry
in a hash-linked block. Editing any entry afterwards breaks the chain.
"""

import dataclasses

import numpy as np

from maritime_ledger import (
    SULFUR_REGULATION,
    Chain,
    DataPoint,
    GeoPosition,
    LedgerEntry,
    Validator,
    ValidatorSet,
    append_block,
    assemble_block,
    canonical_encode,
    generate_compliance_id,
    hash_data_point,
    verify_chain,
    vote,
)

# one reading: 0.45 % sulfur in the Baltic at time index 12
d = DataPoint(9074729, SULFUR_REGULATION, 0.45, 12, GeoPosition(57.0, 20.0))
print(canonical_encode(d))
print(hash_data_point(d).hex)

# three honest validators and a seeded id stream
validators = ValidatorSet((Validator("a", 40), Validator("b", 30), Validator("c", 30)))
rng = np.random.default_rng(1)

chain = Chain.new()
for h in range(1, 6):
    entries = [LedgerEntry(generate_compliance_id(rng), hash_data_point(d), 0, 9074729, 12)]
    block = assemble_block(entries, "a", chain, time=2.2 * h)
    chain = append_block(chain, block, vote(validators, block, chain))
print("height", chain.height, "verify:", verify_chain(chain))

# whitewash the entry in block 3: flip its compliance bit to 1
blocks = list(chain.blocks)
e = blocks[3].entries[0]
blocks[3] = dataclasses.replace(blocks[3], entries=(dataclasses.replace(e, compliance_bit=1),))
print("after edit:", verify_chain(blocks))
