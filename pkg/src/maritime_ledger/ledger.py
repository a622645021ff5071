"""Hash-linked, append-only chain of committed (digest, compliance bit) entries.

On disk a chain is JSON Lines: one block per line, genesis first, each line in
canonical form (sorted keys, no whitespace). Loading rejects any line that is
not byte-identical to the canonical rendering of what it parses to.
"""

from __future__ import annotations

import json
import os
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Mapping, NamedTuple, Sequence

from .model import ZERO_DIGEST, Digest

if TYPE_CHECKING:
    import numpy as np

    from .consensus import VoteRecord


class LedgerError(Exception):
    pass


class BlockRejected(LedgerError):
    pass


class LedgerFormatError(LedgerError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line

    @property
    def height(self) -> int:
        """Height of the block the bad line would hold (one block per line)."""
        return self.line - 1


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True, allow_nan=False)


def generate_compliance_id(rng: "np.random.Generator") -> uuid.UUID:
    """128 random bits from the seeded stream."""
    return uuid.UUID(bytes=rng.bytes(16))


@dataclass(frozen=True)
class LedgerEntry:
    compliance_id: uuid.UUID
    digest: Digest
    compliance_bit: int
    vessel_imo: int
    timestamp: int

    def to_dict(self) -> dict:
        return {
            "compliance_id": self.compliance_id.hex,
            "digest": self.digest.hex,
            "bit": self.compliance_bit,
            "vessel": self.vessel_imo,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LedgerEntry":
        if set(d) != {"compliance_id", "digest", "bit", "vessel", "timestamp"}:
            raise ValueError(f"unexpected entry keys {sorted(d)}")
        cid = d["compliance_id"]
        if not isinstance(cid, str) or len(cid) != 32 or any(c not in "0123456789abcdef" for c in cid):
            raise ValueError(f"bad compliance id {cid!r}")
        bit = d["bit"]
        if bit not in (0, 1) or isinstance(bit, bool):
            raise ValueError(f"bad compliance bit {bit!r}")
        for key in ("vessel", "timestamp"):
            if not isinstance(d[key], int) or isinstance(d[key], bool):
                raise ValueError(f"{key} must be an integer")
        return cls(uuid.UUID(hex=cid), Digest.from_hex(d["digest"]), bit, d["vessel"], d["timestamp"])


def block_hash_of(
    height: int, prev_hash: Digest, entries: Sequence[LedgerEntry], proposer_id: str | None, time: float
) -> Digest:
    header = {
        "height": height,
        "prev_hash": prev_hash.hex,
        "entries": [e.to_dict() for e in entries],
        "proposer": proposer_id,
        "time": time,
    }
    return Digest.of(_canonical(header).encode("ascii"))


def seal_of(block_hash: Digest, approvals: Sequence[tuple[str, float]]) -> Digest:
    return Digest.of(block_hash.raw + _canonical([[v, s] for v, s in approvals]).encode("ascii"))


@dataclass(frozen=True)
class Block:
    height: int
    prev_hash: Digest
    entries: tuple[LedgerEntry, ...]
    proposer_id: str | None
    time: float
    block_hash: Digest
    approvals: tuple[tuple[str, float], ...] = ()
    seal: Digest = ZERO_DIGEST

    def recomputed_hash(self) -> Digest:
        return block_hash_of(self.height, self.prev_hash, self.entries, self.proposer_id, self.time)

    def with_approvals(self, approvals: Sequence[tuple[str, float]]) -> "Block":
        approvals = tuple((str(v), float(s)) for v, s in approvals)
        return Block(
            self.height, self.prev_hash, self.entries, self.proposer_id, self.time,
            self.block_hash, approvals, seal_of(self.block_hash, approvals),
        )

    def to_dict(self) -> dict:
        return {
            "height": self.height,
            "prev_hash": self.prev_hash.hex,
            "entries": [e.to_dict() for e in self.entries],
            "proposer": self.proposer_id,
            "time": self.time,
            "approvals": [[v, s] for v, s in self.approvals],
            "block_hash": self.block_hash.hex,
            "seal": self.seal.hex,
        }

    def to_line(self) -> str:
        return _canonical(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "Block":
        keys = {"height", "prev_hash", "entries", "proposer", "time", "approvals", "block_hash", "seal"}
        if not isinstance(d, dict) or set(d) != keys:
            raise ValueError("block record has unexpected keys")
        if not isinstance(d["height"], int) or isinstance(d["height"], bool):
            raise ValueError("height must be an integer")
        if d["proposer"] is not None and not isinstance(d["proposer"], str):
            raise ValueError("proposer must be a string or null")
        if not isinstance(d["time"], float):
            raise ValueError("time must be a float")
        approvals = []
        for item in d["approvals"]:
            if (
                not isinstance(item, list) or len(item) != 2
                or not isinstance(item[0], str) or not isinstance(item[1], float)
            ):
                raise ValueError("approval must be [validator id, stake]")
            approvals.append((item[0], item[1]))
        return cls(
            height=d["height"],
            prev_hash=Digest.from_hex(d["prev_hash"]),
            entries=tuple(LedgerEntry.from_dict(e) for e in d["entries"]),
            proposer_id=d["proposer"],
            time=d["time"],
            block_hash=Digest.from_hex(d["block_hash"]),
            approvals=tuple(approvals),
            seal=Digest.from_hex(d["seal"]),
        )


def genesis_block() -> Block:
    h = block_hash_of(0, ZERO_DIGEST, (), None, 0.0)
    return Block(0, ZERO_DIGEST, (), None, 0.0, h).with_approvals(())


@dataclass(frozen=True)
class Chain:
    """Immutable snapshot; extending returns a new chain, so snapshots can be
    handed between threads freely."""

    blocks: tuple[Block, ...]
    _ids: frozenset = field(default=frozenset(), repr=False, compare=False)

    @classmethod
    def new(cls) -> "Chain":
        return cls((genesis_block(),))

    @classmethod
    def from_blocks(cls, blocks: Sequence[Block]) -> "Chain":
        ids = frozenset(e.compliance_id for b in blocks for e in b.entries)
        return cls(tuple(blocks), ids)

    @property
    def tip(self) -> Block:
        return self.blocks[-1]

    @property
    def height(self) -> int:
        return self.tip.height

    def __len__(self) -> int:
        return len(self.blocks)

    def has_id(self, cid: uuid.UUID) -> bool:
        return cid in self._ids

    def entries(self):
        for b in self.blocks:
            yield from b.entries

    def extended(self, block: Block) -> "Chain":
        return Chain(self.blocks + (block,), self._ids | {e.compliance_id for e in block.entries})


def assemble_block(
    pending: Sequence[LedgerEntry], proposer: str, chain: Chain, time: float | None = None
) -> Block:
    """Bundle every pending entry, compliant or not, into the next candidate block."""
    if not pending:
        raise LedgerError("cannot assemble a block from an empty pending set")
    height = chain.height + 1
    if time is None:
        time = chain.tip.time
    entries = tuple(pending)
    prev = chain.tip.block_hash
    return Block(height, prev, entries, proposer, float(time), block_hash_of(height, prev, entries, proposer, float(time)))


def candidate_problem(
    chain: Chain, block: Block, expected: Mapping[uuid.UUID, LedgerEntry] | None = None
) -> str | None:
    """Why `block` is not a valid successor of `chain`, or None if it is.

    With `expected`, every entry must also match the submitted transaction it
    claims to carry.
    """
    if block.height != chain.height + 1:
        return f"height {block.height} does not follow tip {chain.height}"
    if block.prev_hash != chain.tip.block_hash:
        return "prev_hash does not match the tip"
    if block.recomputed_hash() != block.block_hash:
        return "block_hash does not match contents"
    if not block.entries:
        return "block carries no entries"
    seen = set()
    for e in block.entries:
        if e.compliance_id in seen or chain.has_id(e.compliance_id):
            return f"duplicate compliance id {e.compliance_id.hex}"
        seen.add(e.compliance_id)
        if expected is not None and expected.get(e.compliance_id) != e:
            return f"entry {e.compliance_id.hex} does not match its submitted transaction"
    return None


def append_block(chain: Chain, block: Block, vote: "VoteRecord") -> Chain:
    """Extend `chain` by `block` once `vote` carries the required approvals.

    Raises BlockRejected (leaving `chain` untouched) on any linkage problem or
    when the vote is for another block or fell short of its threshold.
    """
    if vote.block_hash != block.block_hash:
        raise BlockRejected("vote record is for a different block")
    if not vote.approved:
        raise BlockRejected("approving stake is below the consensus threshold")
    problem = candidate_problem(chain, block)
    if problem:
        raise BlockRejected(problem)
    return chain.extended(block.with_approvals(vote.approvals))


class ChainFault(NamedTuple):
    height: int
    reason: str


def verify_chain(chain: Chain | Sequence[Block]) -> ChainFault | None:
    """Recompute every hash, seal and link; report the lowest failing height."""
    blocks = chain.blocks if isinstance(chain, Chain) else tuple(chain)
    if not blocks:
        return ChainFault(0, "chain has no genesis block")
    seen: set[uuid.UUID] = set()
    prev: Block | None = None
    for pos, b in enumerate(blocks):
        if b.height != pos:
            return ChainFault(pos, f"height {b.height} at position {pos}")
        if b.recomputed_hash() != b.block_hash:
            return ChainFault(pos, "block_hash does not match contents")
        if seal_of(b.block_hash, b.approvals) != b.seal:
            return ChainFault(pos, "seal does not match approvals")
        if prev is None:
            if b.prev_hash != ZERO_DIGEST or b.entries or b.proposer_id is not None:
                return ChainFault(0, "malformed genesis block")
        elif b.prev_hash != prev.block_hash:
            return ChainFault(pos, "prev_hash does not link to predecessor")
        for e in b.entries:
            if e.compliance_id in seen:
                return ChainFault(pos, f"duplicate compliance id {e.compliance_id.hex}")
            seen.add(e.compliance_id)
        prev = b
    return None


def persist(chain: Chain, path) -> None:
    """Write `chain` to `path`, appending only the blocks not yet on disk.

    An existing file must hold a prefix of `chain`; anything else is refused
    rather than rewritten.
    """
    path = Path(path)
    lines = [b.to_line() for b in chain.blocks]
    existing: list[str] = []
    if path.exists():
        text = path.read_text(encoding="ascii")
        existing = text.splitlines()
        if text and not text.endswith("\n"):
            raise LedgerError(f"{path}: last record is incomplete; refusing to append")
        if existing != lines[: len(existing)]:
            raise LedgerError(f"{path}: on-disk ledger is not a prefix of this chain")
    with path.open("a", encoding="ascii") as fh:
        for line in lines[len(existing):]:
            fh.write(line + "\n")
        fh.flush()
        os.fsync(fh.fileno())


def load(path) -> Chain:
    data = Path(path).read_bytes()
    if not data:
        raise LedgerFormatError(1, "empty ledger file")
    raw_lines = data.split(b"\n")
    if raw_lines[-1] != b"":
        raise LedgerFormatError(len(raw_lines), "truncated record (no terminating newline)")
    blocks = []
    for n, raw in enumerate(raw_lines[:-1], start=1):
        try:
            text = raw.decode("ascii")
            block = Block.from_dict(json.loads(text))
            canonical = block.to_line()
        except (UnicodeDecodeError, ValueError, TypeError, KeyError) as exc:
            raise LedgerFormatError(n, f"corrupt record: {exc}") from None
        if canonical != text:
            raise LedgerFormatError(n, "record is not in canonical form")
        blocks.append(block)
    return Chain.from_blocks(blocks)
