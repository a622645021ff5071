"""Chain builders shared by ledger, consensus and acceptance tests."""

import numpy as np

from maritime_ledger.consensus import Validator, ValidatorSet, vote
from maritime_ledger.ledger import Chain, LedgerEntry, append_block, assemble_block, generate_compliance_id
from maritime_ledger.model import SULFUR_REGULATION, DataPoint, GeoPosition, hash_data_point

HONEST = ValidatorSet((Validator("a", 40), Validator("b", 30), Validator("c", 30)))


def make_entry(rng, t=0, bit=1, imo=9074729):
    point = DataPoint(imo, SULFUR_REGULATION, 0.08 if bit else 0.45, t, GeoPosition(56.0, 19.0))
    return LedgerEntry(generate_compliance_id(rng), hash_data_point(point), bit, imo, t)


def build_chain(n_blocks, per_block=5, seed=0):
    rng = np.random.default_rng(seed)
    chain = Chain.new()
    t = 0
    for h in range(n_blocks):
        entries = []
        for _ in range(per_block):
            entries.append(make_entry(rng, t, bit=int(rng.random() > 0.2)))
            t += 1
        block = assemble_block(entries, "a", chain, time=2.2 * (h + 1))
        chain = append_block(chain, block, vote(HONEST, block, chain))
    return chain
