"""Stake-weighted proposer selection, stake-threshold voting and slashing."""

from __future__ import annotations

import uuid
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from .ledger import Block, Chain, LedgerEntry, candidate_problem
from .model import Digest

DEFAULT_THRESHOLD = 2 / 3
DEFAULT_SLASH_FRACTION = 0.5

# relative slack when comparing approving stake against the threshold
_THRESHOLD_RTOL = 1e-12


class ConsensusError(ValueError):
    pass


@dataclass(frozen=True)
class Validator:
    id: str
    stake: float
    honest: bool = True

    def __post_init__(self):
        if not self.stake >= 0:
            raise ConsensusError(f"validator {self.id!r}: stake must be >= 0")


@dataclass(frozen=True)
class ValidatorSet:
    validators: tuple[Validator, ...]
    threshold_fraction: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        vals = tuple(self.validators)
        object.__setattr__(self, "validators", vals)
        ids = [v.id for v in vals]
        if len(set(ids)) != len(ids):
            raise ConsensusError("validator ids must be unique")
        if not 0.5 < self.threshold_fraction <= 1.0:
            raise ConsensusError("threshold_fraction must lie in (0.5, 1]")

    @property
    def total_stake(self) -> float:
        return float(sum(v.stake for v in self.validators))

    def get(self, validator_id: str) -> Validator:
        for v in self.validators:
            if v.id == validator_id:
                return v
        raise KeyError(f"unknown validator {validator_id!r}")

    def probabilities(self) -> np.ndarray:
        """Selection probability of each validator: stake over total stake."""
        stakes = np.array([v.stake for v in self.validators], dtype=float)
        total = stakes.sum()
        if total <= 0:
            raise ConsensusError("total stake is zero; no validator can be selected")
        return stakes / total

    def with_honesty(self, honest: Mapping[str, bool]) -> "ValidatorSet":
        vals = tuple(replace(v, honest=honest.get(v.id, v.honest)) for v in self.validators)
        return replace(self, validators=vals)


def select_proposer(vset: ValidatorSet, rng: np.random.Generator) -> Validator:
    """Inverse-CDF draw over the cumulative probability vector (one uniform)."""
    cdf = np.cumsum(vset.probabilities())
    u = rng.random()
    idx = int(np.searchsorted(cdf, u, side="right"))
    if idx >= len(cdf):
        # u landed above a cdf that rounded below 1.0
        idx = max(i for i, v in enumerate(vset.validators) if v.stake > 0)
    return vset.validators[idx]


@dataclass(frozen=True)
class VoteRecord:
    block_hash: Digest
    approvals: tuple[tuple[str, float], ...]
    approved: bool

    @property
    def approving_stake(self) -> float:
        return float(sum(s for _, s in self.approvals))


def vote(
    vset: ValidatorSet,
    block: Block,
    chain: Chain,
    expected: Mapping[uuid.UUID, LedgerEntry] | None = None,
) -> VoteRecord:
    """Each validator checks `block` locally; honest ones approve iff it checks
    out, dishonest ones invert that."""
    valid = candidate_problem(chain, block, expected) is None
    approvals = tuple((v.id, v.stake) for v in vset.validators if valid == v.honest)
    needed = vset.threshold_fraction * vset.total_stake
    approving = sum(s for _, s in approvals)
    approved = approving > 0 and approving >= needed * (1 - _THRESHOLD_RTOL)
    return VoteRecord(block.block_hash, approvals, bool(approved))


def slash(vset: ValidatorSet, validator_id: str, fraction: float) -> ValidatorSet:
    if not 0 < fraction <= 1:
        raise ConsensusError("slash fraction must lie in (0, 1]")
    target = vset.get(validator_id)
    new_stake = max(0.0, target.stake * (1.0 - fraction))
    vals = tuple(replace(v, stake=new_stake) if v.id == validator_id else v for v in vset.validators)
    return replace(vset, validators=vals)


def detect_and_slash(
    vset: ValidatorSet,
    record: VoteRecord,
    block: Block,
    chain: Chain,
    expected: Mapping[uuid.UUID, LedgerEntry] | None = None,
    fraction: float = DEFAULT_SLASH_FRACTION,
) -> ValidatorSet:
    """Slash the proposer and every approver of a block that fails independent
    verification."""
    if candidate_problem(chain, block, expected) is None:
        return vset
    offenders = {vid for vid, _ in record.approvals}
    if block.proposer_id is not None:
        offenders.add(block.proposer_id)
    for v in vset.validators:
        if v.id in offenders:
            vset = slash(vset, v.id, fraction)
    return vset
