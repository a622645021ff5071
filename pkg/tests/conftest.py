import math

import pytest

from maritime_ledger.consensus import Validator, ValidatorSet
from maritime_ledger.model import GeoPosition, VesselIdentity
from maritime_ledger.simnet import Fault, FaultKind, FleetScenario, RouteLeg, SensorSpec, VesselSpec

BALTIC = GeoPosition(56.0, 19.0)
US_EAST = GeoPosition(40.0, -70.0)
MID_PACIFIC = GeoPosition(0.0, -150.0)


def vessel(imo=9074729, owner="AcmeShipping", flag="Panama", fuel=0.08, position=US_EAST,
           location="USA-EastCoast", sensors=("s1",), route=None):
    legs = route or (RouteLeg(0.0, position, location),)
    return VesselSpec(
        VesselIdentity(imo, owner, flag),
        fuel,
        tuple(legs),
        tuple(SensorSpec(f"{imo}-{s}") for s in sensors),
    )


def validators(*stakes, threshold=2 / 3, dishonest=()):
    vals = tuple(Validator(f"v{i}", s, honest=i not in dishonest) for i, s in enumerate(stakes))
    return ValidatorSet(vals, threshold)


def scenario(vessels=(), stakes=(40, 30, 20, 10), port_states=None, faults=(), **kw):
    return FleetScenario(
        vessels=tuple(vessels),
        validators=validators(*stakes),
        port_states={"USA-EastCoast": "USCG"} if port_states is None else port_states,
        faults=tuple(faults),
        **kw,
    )


def high_sulfur(imo, start, end, value=0.45):
    return Fault(FaultKind.HIGH_SULFUR, imo, float(start), float(end), value)


@pytest.fixture
def daily_scenario():
    return scenario([vessel()], seed=20240601)


@pytest.fixture
def inf():
    return math.inf


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
