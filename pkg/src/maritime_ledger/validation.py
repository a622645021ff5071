"""Per-reading validation and pairwise cross-sensor consistency."""

from __future__ import annotations

import enum
import itertools
import math
from collections import deque
from dataclasses import dataclass
from typing import Mapping, Sequence

from .model import DataPoint, Quantity, SensorReading


class Reason(str, enum.Enum):
    OK = "ok"
    MALFORMED = "malformed"
    OUT_OF_RANGE = "out_of_range"
    CALIBRATION_EXPIRED = "calibration_expired"
    STALE_CLOCK = "stale_clock"
    SUSPECT_SENSOR = "suspect_sensor"


@dataclass(frozen=True)
class ValidationRules:
    value_min: float = 0.0
    value_max: float = 5.0
    calibration_required: bool = True
    max_clock_skew: float = 300.0

    def __post_init__(self):
        if not self.value_min <= self.value_max:
            raise ValueError("value_min must not exceed value_max")
        if self.max_clock_skew < 0:
            raise ValueError("max_clock_skew must be >= 0")


@dataclass(frozen=True)
class ConsistencyConfig:
    epsilon: float = 0.02
    gamma: float = 0.8
    window_length: int = 12

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be >= 0")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.window_length < 1:
            raise ValueError("window_length must be >= 1")


@dataclass(frozen=True)
class ValidationVerdict:
    valid: bool
    reason: Reason

    @classmethod
    def ok(cls) -> "ValidationVerdict":
        return cls(True, Reason.OK)

    @classmethod
    def fail(cls, reason: Reason) -> "ValidationVerdict":
        return cls(False, reason)


def validate(
    d: DataPoint,
    r: SensorReading,
    rules: ValidationRules,
    now: float,
    last_time_index: int | None = None,
) -> ValidationVerdict:
    """Check one reading; the first failure wins in the order
    malformed, out_of_range, calibration_expired, stale_clock.

    `last_time_index` is the previous accepted index for this sensor, if any;
    a reading that goes backwards in time is malformed.
    """
    value = r.value
    if (
        not isinstance(value, (int, float))
        or not math.isfinite(value)
        or d.timestamp != r.time_index
        or Quantity(d.quantity) != Quantity(r.quantity)
        or (last_time_index is not None and r.time_index < last_time_index)
    ):
        return ValidationVerdict.fail(Reason.MALFORMED)
    if not rules.value_min <= value <= rules.value_max:
        return ValidationVerdict.fail(Reason.OUT_OF_RANGE)
    if rules.calibration_required and r.calibration_expiry < now:
        return ValidationVerdict.fail(Reason.CALIBRATION_EXPIRED)
    if abs(r.wall_time - now) > rules.max_clock_skew:
        return ValidationVerdict.fail(Reason.STALE_CLOCK)
    return ValidationVerdict.ok()


# Readings carry 6 decimals; a difference within this of epsilon counts as
# equal to it, so that e.g. |0.10 - 0.08| <= 0.02 holds despite binary rounding.
_EPSILON_SLACK = 1e-9


def pair_consistency(r_a: float, r_b: float, epsilon: float) -> int:
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    return 1 if abs(r_a - r_b) <= epsilon + _EPSILON_SLACK else 0


def window_score(pair_bits: Sequence[int]) -> float:
    if len(pair_bits) == 0:
        raise ValueError("window is empty; the mean is undefined")
    return sum(pair_bits) / len(pair_bits)


def mark_suspect(score: float, gamma: float) -> bool:
    return score < gamma


class ConsistencyTracker:
    """Trailing-window agreement scores for every pair of sensors in a group.

    A group is a set of redundant sensors measuring the same quantity (one
    vessel's sulfur sensors). Not thread-safe: one pipeline stage owns it.
    """

    def __init__(self, config: ConsistencyConfig):
        self.config = config
        self._windows: dict[tuple[str, str], deque[int]] = {}
        self._flagged: set[tuple[str, str]] = set()

    def window(self, a: str, b: str) -> tuple[int, ...]:
        return tuple(self._windows.get(_pair_key(a, b), ()))

    def observe(self, readings: Mapping[str, float]) -> dict[tuple[str, str], float]:
        """Push one time index of readings; return the current score per pair."""
        scores = {}
        for a, b in itertools.combinations(sorted(readings), 2):
            key = (a, b)
            win = self._windows.setdefault(key, deque(maxlen=self.config.window_length))
            win.append(pair_consistency(readings[a], readings[b], self.config.epsilon))
            scores[key] = window_score(win)
        return scores

    def excluded(self, readings: Mapping[str, float]) -> set[str]:
        """Observe `readings` and return the sensors to drop for this window.

        A pair that has just been flagged loses both members. While it stays
        flagged in later windows, a member that still agrees with some third
        sensor is taken back.
        """
        scores = self.observe(readings)
        flagged = {pair for pair, s in scores.items() if mark_suspect(s, self.config.gamma)}
        fresh = flagged - self._flagged
        self._flagged = flagged
        concordant = {sid for pair, s in scores.items() if pair not in flagged for sid in pair}
        dropped = {sid for pair in fresh for sid in pair}
        return dropped | ({sid for pair in flagged - fresh for sid in pair} - concordant)


def _pair_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)
