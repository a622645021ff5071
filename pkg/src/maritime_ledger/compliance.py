"""The binary compliance function, dispatched by regulation identifier."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

from .geofence import EcaAtlas, is_in_eca
from .model import SULFUR_REGULATION, DataPoint

SULFUR_LIMIT_ECA = 0.10
SULFUR_LIMIT_GLOBAL = 0.50


class UnknownRegulationError(LookupError):
    pass


class Area(str, enum.Enum):
    ECA = "ECA"
    NON_ECA = "non-ECA"


@dataclass(frozen=True)
class ComplianceResult:
    bit: int
    limit_applied: float
    area: Area
    message: str

    @property
    def compliant(self) -> bool:
        return self.bit == 1


def sulfur_limit(in_eca: bool) -> float:
    return SULFUR_LIMIT_ECA if in_eca else SULFUR_LIMIT_GLOBAL


def evaluate_sulfur(value: float, in_eca: bool) -> ComplianceResult:
    """Sulfur content (percent by mass) against the limit for the area.

    The comparison is inclusive: a reading exactly at the limit complies.
    """
    if not math.isfinite(value) or value < 0:
        raise ValueError(f"sulfur content must be finite and non-negative, got {value!r}")
    limit = sulfur_limit(in_eca)
    area = Area.ECA if in_eca else Area.NON_ECA
    if value <= limit:
        return ComplianceResult(1, limit, area, f"Compliant - Below {limit:.2f}%")
    return ComplianceResult(0, limit, area, f"Non-compliant - Above {limit:.2f}%")


Evaluator = Callable[[DataPoint, EcaAtlas], ComplianceResult]

_REGISTRY: dict[str, Evaluator] = {}


def register_regulation(name: str):
    """Decorator adding an evaluator for regulation `name` to the dispatch table."""

    def deco(fn: Evaluator) -> Evaluator:
        if name in _REGISTRY:
            raise ValueError(f"regulation {name!r} already registered")
        _REGISTRY[name] = fn
        return fn

    return deco


def registered_regulations() -> list[str]:
    return sorted(_REGISTRY)


@register_regulation(SULFUR_REGULATION)
def _sulfur(d: DataPoint, atlas: EcaAtlas) -> ComplianceResult:
    inside, _ = is_in_eca(d.position, atlas)
    return evaluate_sulfur(d.value, inside)


def evaluate(d: DataPoint, atlas: EcaAtlas) -> ComplianceResult:
    try:
        fn = _REGISTRY[d.regulation]
    except KeyError:
        raise UnknownRegulationError(f"no evaluator registered for regulation {d.regulation!r}") from None
    return fn(d, atlas)
