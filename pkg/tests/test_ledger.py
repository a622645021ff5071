import dataclasses
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import HONEST, build_chain, make_entry
from maritime_ledger.consensus import ValidatorSet, Validator, vote
from maritime_ledger.ledger import (
    BlockRejected,
    Chain,
    LedgerEntry,
    LedgerError,
    LedgerFormatError,
    append_block,
    assemble_block,
    generate_compliance_id,
    load,
    persist,
    verify_chain,
)
from maritime_ledger.model import ZERO_DIGEST, Digest


def test_ids_deterministic_per_seed():
    a, b = np.random.default_rng(1), np.random.default_rng(1)
    assert [generate_compliance_id(a) for _ in range(5)] == [generate_compliance_id(b) for _ in range(5)]
    assert generate_compliance_id(np.random.default_rng(1)) != generate_compliance_id(np.random.default_rng(2))


def test_million_ids_distinct():
    rng = np.random.default_rng(2024)
    ids = {generate_compliance_id(rng).int for _ in range(1_000_000)}
    assert len(ids) == 1_000_000


def test_genesis_shape():
    g = Chain.new().tip
    assert g.height == 0 and g.prev_hash == ZERO_DIGEST and g.entries == () and g.proposer_id is None


def test_assemble_on_empty_chain_keeps_every_entry():
    rng = np.random.default_rng(3)
    chain = Chain.new()
    entries = [make_entry(rng, i, bit) for i, bit in enumerate((1, 0, 1))]
    block = assemble_block(entries, "a", chain, time=2.2)
    assert block.height == 1
    assert block.prev_hash == chain.tip.block_hash
    assert [e.compliance_bit for e in block.entries] == [1, 0, 1]
    assert block.recomputed_hash() == block.block_hash
    with pytest.raises(LedgerError):
        assemble_block([], "a", chain)


def test_append_valid_and_stale_candidates():
    rng = np.random.default_rng(4)
    chain = Chain.new()
    block = assemble_block([make_entry(rng)], "a", chain, time=2.2)
    longer = append_block(chain, block, vote(HONEST, block, chain))
    assert longer.height == chain.height + 1

    stale = assemble_block([make_entry(rng)], "a", chain, time=4.4)  # links to genesis, not tip
    with pytest.raises(BlockRejected):
        append_block(longer, stale, vote(HONEST, stale, chain))
    assert longer.height == 1


def test_append_requires_threshold():
    rng = np.random.default_rng(5)
    chain = Chain.new()
    block = assemble_block([make_entry(rng)], "a", chain, time=2.2)
    weak = ValidatorSet((Validator("a", 60), Validator("b", 40, honest=False)))
    record = vote(weak, block, chain)
    assert not record.approved
    with pytest.raises(BlockRejected):
        append_block(chain, block, record)


def test_duplicate_compliance_id_rejected():
    rng = np.random.default_rng(6)
    chain = Chain.new()
    e = make_entry(rng)
    block = assemble_block([e], "a", chain, time=2.2)
    chain = append_block(chain, block, vote(HONEST, block, chain))
    again = assemble_block([e], "a", chain, time=4.4)
    with pytest.raises(BlockRejected):
        append_block(chain, again, vote(HONEST, again, chain))


def test_clean_chain_verifies():
    assert verify_chain(build_chain(50)) is None


def test_bit_flip_in_block_7_entry_3_is_localized():
    chain = build_chain(50)
    blocks = list(chain.blocks)
    e = blocks[7].entries[3]
    flipped = LedgerEntry(e.compliance_id, e.digest, 1 - e.compliance_bit, e.vessel_imo, e.timestamp)
    entries = blocks[7].entries[:3] + (flipped,) + blocks[7].entries[4:]
    blocks[7] = dataclasses.replace(blocks[7], entries=entries)
    assert verify_chain(blocks).height == 7


def test_random_field_mutations_never_verify():
    chain = build_chain(20)
    rng = np.random.default_rng(8)
    for _ in range(1000):
        blocks = list(chain.blocks)
        h = int(rng.integers(0, len(blocks)))
        b = blocks[h]
        choice = int(rng.integers(0, 6))
        if choice == 0:
            b = dataclasses.replace(b, time=b.time + 1e-3)
        elif choice == 1:
            b = dataclasses.replace(b, prev_hash=Digest(bytes(rng.bytes(32))))
        elif choice == 2:
            b = dataclasses.replace(b, proposer_id="mallory")
        elif choice == 3:
            b = dataclasses.replace(b, approvals=b.approvals + (("mallory", 1.0),))
        elif choice == 4:
            b = dataclasses.replace(b, block_hash=Digest(bytes(rng.bytes(32))))
        elif b.entries:
            i = int(rng.integers(0, len(b.entries)))
            e = b.entries[i]
            raw = bytearray(e.digest.raw)
            raw[int(rng.integers(0, 32))] ^= 1 << int(rng.integers(0, 8))
            mutated = LedgerEntry(e.compliance_id, Digest(bytes(raw)), e.compliance_bit, e.vessel_imo, e.timestamp)
            b = dataclasses.replace(b, entries=b.entries[:i] + (mutated,) + b.entries[i + 1:])
        else:
            b = dataclasses.replace(b, height=b.height + 1)
        blocks[h] = b
        fault = verify_chain(blocks)
        assert fault is not None and fault.height == h


@pytest.mark.parametrize("n", [0, 100])
def test_persist_load_round_trip(tmp_path, n):
    chain = build_chain(n)
    path = tmp_path / "ledger.jsonl"
    persist(chain, path)
    loaded = load(path)
    assert loaded.blocks == chain.blocks
    assert verify_chain(loaded) is None
    copy = tmp_path / "again.jsonl"
    persist(loaded, copy)
    assert copy.read_bytes() == path.read_bytes()


def test_persist_only_appends(tmp_path):
    path = tmp_path / "ledger.jsonl"
    full = build_chain(10)
    persist(Chain.from_blocks(full.blocks[:6]), path)
    before = path.read_bytes()
    persist(full, path)
    after = path.read_bytes()
    assert after.startswith(before)
    assert load(path).blocks == full.blocks
    other = build_chain(10, seed=99)
    with pytest.raises(LedgerError):
        persist(other, path)
    assert path.read_bytes() == after


def test_truncated_last_line_names_it(tmp_path):
    path = tmp_path / "ledger.jsonl"
    persist(build_chain(5), path)
    data = path.read_bytes()
    path.write_bytes(data[:-20])
    with pytest.raises(LedgerFormatError) as info:
        load(path)
    assert info.value.line == 6
    assert "line 6" in str(info.value)


def test_non_canonical_record_rejected(tmp_path):
    path = tmp_path / "ledger.jsonl"
    persist(build_chain(2), path)
    lines = path.read_text().splitlines()
    lines[1] = json.dumps(json.loads(lines[1]), indent=None)  # default separators add spaces
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(LedgerFormatError) as info:
        load(path)
    assert info.value.line == 2


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(1, 6), min_size=1, max_size=8), st.integers(0, 2**32))
def test_ids_never_disappear_as_chain_grows(sizes, seed):
    rng = np.random.default_rng(seed)
    chain = Chain.new()
    seen = set()
    for h, size in enumerate(sizes):
        block = assemble_block([make_entry(rng, h) for _ in range(size)], "a", chain, time=float(h + 1))
        chain = append_block(chain, block, vote(HONEST, block, chain))
        ids = {e.compliance_id for e in chain.entries()}
        assert seen <= ids
        seen = ids
    assert verify_chain(chain) is None
