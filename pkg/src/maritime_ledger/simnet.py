"""Discrete-event fleet simulation.

Each data pull runs the monitoring cycle (collect, validate, consistency
exclusion, hash + compliance id, compliance check, enqueue). Blocks are then
produced back to back while the queue is non-empty: a stake-weighted proposer
bundles up to `block_capacity` transactions, validators vote, and committed
transactions are applied to the contract world, which raises notifications
for violations. The clock is event driven; nothing sleeps.
"""

from __future__ import annotations

import csv
import enum
import json
import logging
import math
import uuid
from collections import Counter, deque
from dataclasses import dataclass, field, replace
from decimal import Decimal
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np

from .compliance import evaluate
from .consensus import DEFAULT_SLASH_FRACTION, Validator, ValidatorSet, detect_and_slash, select_proposer, vote
from .contracts import CallContext, ContractWorld, GasSchedule, NonComplianceNotification, Role, write_call_log
from .geofence import DEFAULT_ATLAS, AtlasError, EcaAtlas, is_in_eca, load_atlas
from .ledger import Block, Chain, LedgerEntry, append_block, assemble_block, generate_compliance_id, persist
from .model import SULFUR_REGULATION, DataPoint, Digest, GeoPosition, SensorReading, VesselIdentity, hash_data_point
from .reporting import cost_report
from .validation import ConsistencyConfig, ConsistencyTracker, Reason, ValidationRules, validate

log = logging.getLogger(__name__)

DEFAULT_BLOCK_TIME_RANGE = (2.13, 2.32)
ADMIN = CallContext("admin", Role.ADMIN)

LEDGER_FILE = "ledger.jsonl"
CALLS_FILE = "calls.jsonl"
METRICS_FILE = "metrics.json"
MAILBOX_FILE = "mailboxes.json"
BLOCKS_FILE = "blocks.csv"


class ScenarioError(ValueError):
    """A scenario failed validation; `errors` lists every violation found."""

    def __init__(self, errors: list[str]):
        super().__init__("invalid scenario:\n  " + "\n  ".join(errors))
        self.errors = errors


class SimulationError(RuntimeError):
    pass


class Status(str, enum.Enum):
    COMPLIANT = "compliant"
    NON_COMPLIANT = "non-compliant"


class FaultKind(str, enum.Enum):
    HIGH_SULFUR = "high_sulfur"  # vessel burns fuel with `value` % sulfur
    STUCK = "stuck"  # sensor reports `value` regardless of truth
    DRIFT = "drift"  # sensor offset grows by `rate` points per hour
    OUT_OF_RANGE = "out_of_range"  # sensor reports implausible `value`
    CLOCK_SKEW = "clock_skew"  # sensor wall clock off by `value` seconds
    DISHONEST_VALIDATOR = "dishonest_validator"


_FAULT_TARGET = {
    FaultKind.HIGH_SULFUR: "vessel",
    FaultKind.STUCK: "sensor",
    FaultKind.DRIFT: "sensor",
    FaultKind.OUT_OF_RANGE: "sensor",
    FaultKind.CLOCK_SKEW: "sensor",
    FaultKind.DISHONEST_VALIDATOR: "validator",
}


@dataclass(frozen=True)
class Fault:
    kind: FaultKind
    target: Any
    start: float = 0.0
    end: float = math.inf
    value: float = 0.0
    rate: float = 0.0

    def active(self, t: float) -> bool:
        return self.start <= t < self.end


@dataclass(frozen=True)
class SensorSpec:
    id: str
    noise: float = 0.0
    calibration_expiry: float = math.inf


@dataclass(frozen=True)
class RouteLeg:
    start: float
    position: GeoPosition
    location: str | None = None


@dataclass(frozen=True)
class VesselSpec:
    identity: VesselIdentity
    fuel_sulfur: float
    route: tuple[RouteLeg, ...]
    sensors: tuple[SensorSpec, ...]

    @property
    def imo(self) -> int:
        return self.identity.imo_number

    def leg_at(self, t: float) -> RouteLeg:
        current = self.route[0]
        for leg in self.route:
            if leg.start <= t:
                current = leg
        return current


@dataclass(frozen=True)
class FleetScenario:
    vessels: tuple[VesselSpec, ...]
    validators: ValidatorSet
    seed: int = 0
    duration: float = 86_400.0
    pull_interval: float = 3_600.0
    block_capacity: int = 100
    block_time_range: tuple[float, float] = DEFAULT_BLOCK_TIME_RANGE
    slash_fraction: float = DEFAULT_SLASH_FRACTION
    rules: ValidationRules = ValidationRules()
    consistency: ConsistencyConfig = ConsistencyConfig()
    atlas: EcaAtlas = DEFAULT_ATLAS
    port_states: Mapping[str, str] = field(default_factory=dict)
    faults: tuple[Fault, ...] = ()
    gas: GasSchedule = GasSchedule()
    ambient_gas_price_range: tuple[int, int] | None = None

    @classmethod
    def from_dict(cls, doc: Mapping, base_dir: Path | None = None) -> "FleetScenario":
        return _parse_scenario(doc, base_dir)

    def with_overrides(self, **changes) -> "FleetScenario":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


def load_scenario(path) -> FleetScenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError([f"{path}: invalid JSON: {exc}"]) from None
    return FleetScenario.from_dict(doc, base_dir=path.parent)


def _parse_scenario(doc: Mapping, base_dir: Path | None) -> FleetScenario:
    errors: list[str] = []
    if not isinstance(doc, Mapping):
        raise ScenarioError(["scenario must be a JSON object"])

    known = {
        "seed", "duration", "pull_interval", "block_capacity", "block_time_range", "validation",
        "consistency", "validators", "atlas", "port_states", "vessels", "faults", "gas", "ambient",
    }
    for key in sorted(set(doc) - known):
        errors.append(f"unknown top-level key {key!r}")

    def num(key, default, positive=False, integer=False):
        value = doc.get(key, default)
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            errors.append(f"{key}: expected a number, got {value!r}")
            return default
        if integer and int(value) != value:
            errors.append(f"{key}: expected an integer, got {value!r}")
            return default
        if positive and value <= 0:
            errors.append(f"{key}: must be > 0")
            return default
        return int(value) if integer else float(value)

    seed = num("seed", 0, integer=True)
    if not 0 <= seed < 2**64:
        errors.append("seed: must be a 64-bit unsigned integer")
        seed = 0
    duration = num("duration", 86_400.0, positive=True)
    pull_interval = num("pull_interval", 3_600.0, positive=True)
    capacity = num("block_capacity", 100, positive=True, integer=True)

    btr = doc.get("block_time_range", list(DEFAULT_BLOCK_TIME_RANGE))
    if (
        not isinstance(btr, list) or len(btr) != 2
        or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in btr)
    ):
        errors.append("block_time_range: expected [lo, hi]")
        btr = list(DEFAULT_BLOCK_TIME_RANGE)
    elif not 0 < btr[0] <= btr[1]:
        errors.append("block_time_range: need 0 < lo <= hi")
        btr = list(DEFAULT_BLOCK_TIME_RANGE)

    def section(name, factory, default):
        raw = doc.get(name)
        if raw is None:
            return default
        if not isinstance(raw, Mapping):
            errors.append(f"{name}: expected an object")
            return default
        try:
            return factory(**raw)
        except (TypeError, ValueError) as exc:
            errors.append(f"{name}: {exc}")
            return default

    rules = section("validation", ValidationRules, ValidationRules())
    consistency = section("consistency", ConsistencyConfig, ConsistencyConfig())

    # validators
    vdoc = doc.get("validators", {})
    slash_fraction = DEFAULT_SLASH_FRACTION
    validators = None
    if not isinstance(vdoc, Mapping):
        errors.append("validators: expected an object")
        vdoc = {}
    roster = []
    for i, item in enumerate(vdoc.get("roster", [])):
        try:
            roster.append(Validator(str(item["id"]), float(item["stake"]), bool(item.get("honest", True))))
        except (KeyError, TypeError, ValueError) as exc:
            errors.append(f"validators.roster[{i}]: {exc}")
    if not roster:
        errors.append("validators.roster: at least one validator is required")
    elif sum(v.stake for v in roster) <= 0:
        errors.append("validators.roster: total stake must be > 0")
    sf = vdoc.get("slash_fraction", DEFAULT_SLASH_FRACTION)
    if isinstance(sf, bool) or not isinstance(sf, (int, float)) or not 0 <= sf <= 1:
        errors.append("validators.slash_fraction: must lie in [0, 1] (0 disables slashing)")
    else:
        slash_fraction = float(sf)
    try:
        validators = ValidatorSet(tuple(roster), float(vdoc.get("threshold_fraction", 2 / 3)))
    except (TypeError, ValueError) as exc:
        errors.append(f"validators: {exc}")

    # atlas
    atlas = DEFAULT_ATLAS
    adoc = doc.get("atlas")
    try:
        if isinstance(adoc, str):
            apath = Path(adoc)
            if not apath.is_absolute() and base_dir is not None:
                apath = base_dir / apath
            atlas = load_atlas(apath)
        elif adoc is not None:
            atlas = EcaAtlas.from_dict(adoc)
    except (AtlasError, OSError) as exc:
        errors.append(f"atlas: {exc}")

    port_states = doc.get("port_states", {})
    if not isinstance(port_states, Mapping) or not all(
        isinstance(k, str) and isinstance(v, str) and v for k, v in port_states.items()
    ):
        errors.append("port_states: expected an object mapping location -> authority")
        port_states = {}

    # vessels
    vessels = []
    imos, sensor_ids = set(), set()
    for i, item in enumerate(doc.get("vessels", [])):
        where = f"vessels[{i}]"
        try:
            ident = VesselIdentity(item["imo"], item["owner"], item["flag_state"])
        except (KeyError, TypeError, ValueError) as exc:
            errors.append(f"{where}: {exc}")
            continue
        if ident.imo_number in imos:
            errors.append(f"{where}: duplicate IMO number {ident.imo_number}")
        imos.add(ident.imo_number)
        fuel = item.get("fuel_sulfur", 0.08)
        if isinstance(fuel, bool) or not isinstance(fuel, (int, float)) or not fuel >= 0:
            errors.append(f"{where}.fuel_sulfur: must be a non-negative number")
            fuel = 0.0
        route = []
        for j, leg in enumerate(item.get("route", [])):
            try:
                loc = leg.get("location")
                if loc is not None and not isinstance(loc, str):
                    raise ValueError("location must be a string")
                route.append(RouteLeg(float(leg.get("start", 0.0)), GeoPosition(*leg["position"]), loc))
            except (KeyError, TypeError, ValueError) as exc:
                errors.append(f"{where}.route[{j}]: {exc}")
        route.sort(key=lambda leg: leg.start)
        if not route:
            errors.append(f"{where}.route: at least one leg is required")
        sensors = []
        for j, s in enumerate(item.get("sensors", [])):
            try:
                sid = str(s["id"])
                noise = float(s.get("noise", 0.0))
                expiry = s.get("calibration_expiry")
                expiry = math.inf if expiry is None else float(expiry)
                if noise < 0:
                    raise ValueError("noise must be >= 0")
            except (KeyError, TypeError, ValueError) as exc:
                errors.append(f"{where}.sensors[{j}]: {exc}")
                continue
            if sid in sensor_ids:
                errors.append(f"{where}.sensors[{j}]: duplicate sensor id {sid!r}")
            sensor_ids.add(sid)
            sensors.append(SensorSpec(sid, noise, expiry))
        if not sensors:
            errors.append(f"{where}.sensors: at least one sensor is required")
        if route and sensors:
            vessels.append(VesselSpec(ident, float(fuel), tuple(route), tuple(sensors)))

    # faults
    faults = []
    validator_ids = {v.id for v in roster}
    for i, f in enumerate(doc.get("faults", [])):
        where = f"faults[{i}]"
        try:
            kind = FaultKind(f["kind"])
            target_key = _FAULT_TARGET[kind]
            target = f[target_key]
            end = f.get("end")
            fault = Fault(
                kind, target, float(f.get("start", 0.0)), math.inf if end is None else float(end),
                float(f.get("value", 0.0)), float(f.get("rate", 0.0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            errors.append(f"{where}: {exc!r}")
            continue
        known_targets = {"vessel": imos, "sensor": sensor_ids, "validator": validator_ids}[target_key]
        if target not in known_targets:
            errors.append(f"{where}: unknown {target_key} {target!r}")
        if fault.end < fault.start:
            errors.append(f"{where}: end precedes start")
        faults.append(fault)

    gas = GasSchedule()
    gdoc = doc.get("gas")
    if gdoc is not None:
        try:
            gas = GasSchedule(gas_price_wei=int(gdoc.get("gas_price_wei", 30_000_000_000)),
                              token_usd=Decimal(str(gdoc.get("token_usd", "0.33"))))
        except (AttributeError, TypeError, ValueError, ArithmeticError) as exc:
            errors.append(f"gas: {exc}")

    ambient = None
    amb = doc.get("ambient")
    if amb is not None:
        rng_ = amb.get("gas_price_wei_range") if isinstance(amb, Mapping) else None
        if not (isinstance(rng_, list) and len(rng_) == 2 and 0 < rng_[0] <= rng_[1]):
            errors.append("ambient.gas_price_wei_range: expected [lo, hi] with 0 < lo <= hi")
        else:
            ambient = (int(rng_[0]), int(rng_[1]))

    if errors:
        raise ScenarioError(errors)
    return FleetScenario(
        vessels=tuple(vessels),
        validators=validators,
        seed=seed,
        duration=duration,
        pull_interval=pull_interval,
        block_capacity=capacity,
        block_time_range=(float(btr[0]), float(btr[1])),
        slash_fraction=slash_fraction,
        rules=rules,
        consistency=consistency,
        atlas=atlas,
        port_states=dict(port_states),
        faults=tuple(faults),
        gas=gas,
        ambient_gas_price_range=ambient,
    )


@dataclass(frozen=True)
class Transaction:
    entry: LedgerEntry
    point: DataPoint
    in_eca: bool
    location: str | None
    reading_time: float


class TransactionQueue:
    """FIFO of pending transactions; nothing is ever dropped."""

    def __init__(self, items: Iterable[Transaction] = ()):
        self._items: deque[Transaction] = deque(items)

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def submit(self, tx: Transaction) -> None:
        self._items.append(tx)

    def take(self, n: int) -> list[Transaction]:
        return [self._items.popleft() for _ in range(min(n, len(self._items)))]

    def requeue_front(self, txs: list[Transaction]) -> None:
        self._items.extendleft(reversed(txs))


def submit_tx(queue: TransactionQueue, tx: Transaction) -> TransactionQueue:
    queue.submit(tx)
    return queue


def deliver_notifications(
    notifications: Iterable[NonComplianceNotification] | ContractWorld,
    delivered_at: float | None = None,
    mailboxes: dict[str, list[dict]] | None = None,
) -> dict[str, list[dict]]:
    """Put each notification in the flag-state and port-state mailboxes.

    A notification without a port state (no authority mapped for the
    location) goes to the flag state only, with a warning.
    """
    if isinstance(notifications, ContractWorld):
        notifications = notifications.notifications
    boxes = mailboxes if mailboxes is not None else {}
    for note in notifications:
        message = dict(note.to_dict(), delivered_at=delivered_at)
        boxes.setdefault(f"flag_state:{note.flag_state}", []).append(message)
        if note.port_state:
            boxes.setdefault(f"port_state:{note.port_state}", []).append(message)
        else:
            log.warning(
                "no port state for location %r; notification %s sent to flag state only",
                note.location, note.compliance_id,
            )
    return boxes


@dataclass
class RunMetrics:
    blocks_produced: int = 0
    blocks_rejected: int = 0
    tx_submitted: int = 0
    tx_committed: int = 0
    queue_depth: int = 0
    max_queue_depth: int = 0
    readings_collected: int = 0
    readings_rejected: dict = field(default_factory=dict)
    readings_excluded_suspect: int = 0
    notifications: int = 0
    latencies: list = field(default_factory=list, repr=False)
    slash_events: int = 0

    @property
    def latency_mean(self) -> float:
        return float(np.mean(self.latencies)) if self.latencies else 0.0

    @property
    def latency_p95(self) -> float:
        return float(np.percentile(self.latencies, 95)) if self.latencies else 0.0

    def to_dict(self) -> dict:
        return {
            "blocks_produced": self.blocks_produced,
            "blocks_rejected": self.blocks_rejected,
            "tx_submitted": self.tx_submitted,
            "tx_committed": self.tx_committed,
            "queue_depth": self.queue_depth,
            "max_queue_depth": self.max_queue_depth,
            "readings_collected": self.readings_collected,
            "readings_rejected": dict(sorted(self.readings_rejected.items())),
            "readings_excluded_suspect": self.readings_excluded_suspect,
            "notifications": self.notifications,
            "notification_latency_mean_s": self.latency_mean,
            "notification_latency_p95_s": self.latency_p95,
            "slash_events": self.slash_events,
        }


@dataclass(frozen=True)
class CycleOutcome:
    """What one monitoring cycle decided.

    `statuses` maps compliance id to status for every point that survived
    validation; `notify` lists the ids that will raise a notification once
    their transaction commits.
    """

    statuses: dict[uuid.UUID, Status]
    notify: list[uuid.UUID]
    rejected: list[tuple[str, Reason]]
    excluded: list[str]


class Simulation:
    def __init__(self, scenario: FleetScenario):
        self.scenario = scenario
        self.rng = np.random.default_rng(scenario.seed)
        self.chain = Chain.new()
        self.validators = scenario.validators
        self.world = ContractWorld(scenario.gas, scenario.atlas)
        self.queue = TransactionQueue()
        self.metrics = RunMetrics()
        self.clock = 0.0
        self.compliance_map: dict[uuid.UUID, Status] = {}
        self.mailboxes: dict[str, list[dict]] = {}
        self.error_log: list[str] = []
        self.trace: list[tuple[str, float, int, int, int]] = []
        self._trackers = {v.imo: ConsistencyTracker(scenario.consistency) for v in scenario.vessels}
        self._last_index: dict[str, int] = {}
        self.initialized = False

    # -- setup ---------------------------------------------------------------

    def initialize(self) -> None:
        self.world.deploy_contracts(ADMIN)
        for v in self.scenario.vessels:
            ident = v.identity
            self.world.register_vessel(ADMIN, ident.imo_number, ident.owner, ident.flag_state)
        self.initialized = True

    # -- sensors -------------------------------------------------------------

    def _faults(self, kind: FaultKind, target, t: float) -> list[Fault]:
        return [f for f in self.scenario.faults if f.kind is kind and f.target == target and f.active(t)]

    def read_sensors(self, vessel: VesselSpec, t: float, k: int) -> list[tuple[DataPoint, SensorReading]]:
        true_value = vessel.fuel_sulfur
        for f in self._faults(FaultKind.HIGH_SULFUR, vessel.imo, t):
            true_value = f.value
        leg = vessel.leg_at(t)
        out = []
        for s in vessel.sensors:
            value = true_value
            if s.noise > 0:
                value = max(0.0, value + float(self.rng.normal(0.0, s.noise)))
            for f in self._faults(FaultKind.DRIFT, s.id, t):
                value += f.rate * (t - f.start) / 3600.0 + f.value
            for f in self._faults(FaultKind.STUCK, s.id, t):
                value = f.value
            for f in self._faults(FaultKind.OUT_OF_RANGE, s.id, t):
                value = f.value
            skew = sum(f.value for f in self._faults(FaultKind.CLOCK_SKEW, s.id, t))
            reading = SensorReading(s.id, value, k, t + skew, s.calibration_expiry)
            point = DataPoint(vessel.imo, SULFUR_REGULATION, value, k, leg.position)
            out.append((point, reading))
        return out

    # -- monitoring cycle ----------------------------------------------------

    def monitoring_cycle(self, t: float) -> CycleOutcome:
        if not self.initialized:
            raise SimulationError("world is not initialized (contracts not deployed)")
        sc = self.scenario
        k = int(t // sc.pull_interval)
        statuses: dict[uuid.UUID, Status] = {}
        notify, rejected, excluded_all = [], [], []
        for vessel in sorted(sc.vessels, key=lambda v: v.imo):
            leg = vessel.leg_at(t)
            collected = self.read_sensors(vessel, t, k)
            self.metrics.readings_collected += len(collected)

            valid = []
            for point, reading in collected:
                verdict = validate(point, reading, sc.rules, t, self._last_index.get(reading.sensor_id))
                if not verdict.valid:
                    self.error_log.append(f"t={t:g} vessel={vessel.imo} sensor={reading.sensor_id}: invalid data ({verdict.reason.value})")
                    log.info("invalid data from %s at t=%g: %s", reading.sensor_id, t, verdict.reason.value)
                    rejected.append((reading.sensor_id, verdict.reason))
                    self.metrics.readings_rejected[verdict.reason.value] = (
                        self.metrics.readings_rejected.get(verdict.reason.value, 0) + 1
                    )
                    continue
                self._last_index[reading.sensor_id] = reading.time_index
                valid.append((point, reading))

            excluded = self._trackers[vessel.imo].excluded({r.sensor_id: r.value for _, r in valid})
            if excluded:
                excluded_all.extend(sorted(excluded))
                self.metrics.readings_excluded_suspect += len(excluded)
                self.metrics.readings_rejected[Reason.SUSPECT_SENSOR.value] = (
                    self.metrics.readings_rejected.get(Reason.SUSPECT_SENSOR.value, 0) + len(excluded)
                )

            in_eca, _ = is_in_eca(leg.position, sc.atlas)
            for point, reading in sorted(valid, key=lambda pr: pr[1].sensor_id):
                if reading.sensor_id in excluded:
                    continue
                cid = generate_compliance_id(self.rng)
                digest = hash_data_point(point)
                result = evaluate(point, sc.atlas)
                entry = LedgerEntry(cid, digest, result.bit, vessel.imo, point.timestamp)
                self.submit(Transaction(entry, point, in_eca, leg.location, t))
                status = Status.COMPLIANT if result.compliant else Status.NON_COMPLIANT
                statuses[cid] = status
                if not result.compliant:
                    notify.append(cid)
        return CycleOutcome(statuses, notify, rejected, excluded_all)

    # -- queue and blocks ----------------------------------------------------

    def _snapshot(self, event: str) -> None:
        m = self.metrics
        m.queue_depth = len(self.queue)
        m.max_queue_depth = max(m.max_queue_depth, m.queue_depth)
        self.trace.append((event, self.clock, m.tx_submitted, m.tx_committed, m.queue_depth))

    def submit(self, tx: Transaction) -> None:
        submit_tx(self.queue, tx)
        self.metrics.tx_submitted += 1
        self._snapshot("submit")

    def _effective_validators(self) -> ValidatorSet:
        flips = {
            f.target: False
            for f in self.scenario.faults
            if f.kind is FaultKind.DISHONEST_VALIDATOR and f.active(self.clock)
        }
        return self.validators.with_honesty(flips) if flips else self.validators

    @staticmethod
    def _corrupt(entries: list[LedgerEntry]) -> list[LedgerEntry]:
        """A dishonest proposer whitewashes a violation, or failing that
        tampers with a digest."""
        out = list(entries)
        for i, e in enumerate(out):
            if e.compliance_bit == 0:
                out[i] = LedgerEntry(e.compliance_id, e.digest, 1, e.vessel_imo, e.timestamp)
                return out
        e = out[0]
        raw = bytes([e.digest.raw[0] ^ 0xFF]) + e.digest.raw[1:]
        out[0] = LedgerEntry(e.compliance_id, Digest(raw), e.compliance_bit, e.vessel_imo, e.timestamp)
        return out

    def produce_block(self) -> Block | None:
        """One block attempt. Returns the committed block, or None if rejected."""
        sc = self.scenario
        if not len(self.queue):
            return None
        lo, hi = sc.block_time_range
        self.clock += float(self.rng.uniform(lo, hi))
        vset = self._effective_validators()
        proposer = select_proposer(vset, self.rng)
        txs = self.queue.take(sc.block_capacity)
        expected = {tx.entry.compliance_id: tx.entry for tx in txs}
        entries = [tx.entry for tx in txs]
        if not proposer.honest:
            entries = self._corrupt(entries)
        block = assemble_block(entries, proposer.id, self.chain, time=self.clock)
        record = vote(vset, block, self.chain, expected)
        if sc.slash_fraction > 0:
            slashed = detect_and_slash(vset, record, block, self.chain, expected, sc.slash_fraction)
            if slashed != vset:
                stakes = {v.id: v.stake for v in slashed.validators}
                self.metrics.slash_events += sum(
                    1 for v in vset.validators if stakes[v.id] != v.stake
                )
                self.validators = ValidatorSet(
                    tuple(Validator(v.id, stakes[v.id], v.honest) for v in self.validators.validators),
                    self.validators.threshold_fraction,
                )
        if not record.approved:
            self.queue.requeue_front(txs)
            self.metrics.blocks_rejected += 1
            self._snapshot("reject")
            return None
        self.chain = append_block(self.chain, block, record)
        committed = self.chain.tip
        self.metrics.blocks_produced += 1
        self._apply(committed, txs)
        self._snapshot("commit")
        return committed

    def _apply(self, block: Block, txs: list[Transaction]) -> None:
        sc = self.scenario
        world = self.world
        world.clock = block.time
        before = len(world.notifications)
        owners = {v.imo: CallContext(v.identity.owner, Role.VESSEL_OWNER) for v in sc.vessels}
        for tx in txs:
            imo = tx.entry.vessel_imo
            if sc.ambient_gas_price_range is not None:
                lo, hi = sc.ambient_gas_price_range
                world.schedule = sc.gas.with_price(int(self.rng.integers(lo, hi, endpoint=True)))
            authority = sc.port_states.get(tx.location) if tx.location else None
            if authority:
                world.set_port_state(ADMIN, tx.location, authority, vessel=imo)
            result, _ = world.record_emission(
                owners[imo], imo, tx.point.value, tx.point.position, tx.in_eca,
                tx.location, tx.point.timestamp, tx.entry.compliance_id.hex,
            )
            self.metrics.tx_committed += 1
            self.compliance_map[tx.entry.compliance_id] = (
                Status.COMPLIANT if result.compliant else Status.NON_COMPLIANT
            )
            if not result.compliant:
                self.metrics.latencies.append(block.time - tx.reading_time)
        new = world.notifications[before:]
        self.metrics.notifications += len(new)
        deliver_notifications(new, delivered_at=block.time, mailboxes=self.mailboxes)
        world.schedule = sc.gas

    def drain(self, until: float = math.inf) -> None:
        while len(self.queue) and self.clock < until:
            self.produce_block()

    # -- driver --------------------------------------------------------------

    def pull_times(self) -> list[float]:
        sc = self.scenario
        n = math.ceil(sc.duration / sc.pull_interval)
        return [k * sc.pull_interval for k in range(n) if k * sc.pull_interval < sc.duration]

    def run(self) -> "Simulation":
        if not self.initialized:
            self.initialize()
        times = self.pull_times()
        for i, t in enumerate(times):
            self.clock = max(self.clock, t)
            self.monitoring_cycle(t)
            horizon = times[i + 1] if i + 1 < len(times) else self.scenario.duration
            self.drain(until=horizon)
        return self

    # -- outputs -------------------------------------------------------------

    def metrics_document(self) -> dict:
        report = cost_report(self.world.call_log, self.scenario.gas)
        total = self.world.total_receipt
        doc = self.metrics.to_dict()
        doc.update(
            {
                "seed": self.scenario.seed,
                "chain_height": self.chain.height,
                "total_gas": total.gas_units,
                "total_token": str(total.token_cost),
                "total_usd": str(total.usd_cost),
                "vessel_daily_usd": {
                    str(v.vessel): {
                        "uploads": v.uploads,
                        "days": v.days,
                        "exact": str(v.exact_daily_usd),
                        "rounded": str(v.rounded_daily_usd),
                    }
                    for v in report.vessels
                },
                "validator_stakes": {v.id: v.stake for v in self.validators.validators},
                "compliance_map": {cid.hex: s.value for cid, s in sorted(self.compliance_map.items(), key=lambda kv: kv[0].hex)},
            }
        )
        return doc

    def write_outputs(self, out_dir) -> dict[str, Path]:
        """Write ledger, call log, metrics, mailboxes and per-block CSV.

        A ledger file left in `out_dir` by an earlier run is replaced.
        """
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        files = {name: out / name for name in (LEDGER_FILE, CALLS_FILE, METRICS_FILE, MAILBOX_FILE, BLOCKS_FILE)}
        files[LEDGER_FILE].unlink(missing_ok=True)
        persist(self.chain, files[LEDGER_FILE])
        write_call_log(self.world.call_log, files[CALLS_FILE])
        files[METRICS_FILE].write_text(json.dumps(self.metrics_document(), indent=2, sort_keys=True) + "\n")
        files[MAILBOX_FILE].write_text(json.dumps(self.mailboxes, indent=2, sort_keys=True) + "\n")
        gas_by_block = self._gas_by_block()
        with files[BLOCKS_FILE].open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["height", "time", "tx_count", "gas"])
            for b in self.chain.blocks:
                w.writerow([b.height, repr(b.time), len(b.entries), gas_by_block.get(b.height, 0)])
        return files

    def _gas_by_block(self) -> dict[int, int]:
        by_time = Counter()
        for rec in self.world.call_log:
            if rec.vessel is not None and rec.op != "registerVessel":
                by_time[rec.time] += rec.receipt.gas_units
        return {b.height: by_time.get(b.time, 0) for b in self.chain.blocks if b.height > 0}


@dataclass
class RunResult:
    chain: Chain
    world: ContractWorld
    metrics: RunMetrics
    files: dict[str, Path]
    simulation: Simulation


def run_scenario(scenario: FleetScenario, out_dir=None) -> RunResult:
    sim = Simulation(scenario).run()
    files = sim.write_outputs(out_dir) if out_dir is not None else {}
    return RunResult(sim.chain, sim.world, sim.metrics, files, sim)


def monitoring_cycle(sim: Simulation, t: float) -> CycleOutcome:
    return sim.monitoring_cycle(t)


def produce_block(sim: Simulation) -> Block | None:
    return sim.produce_block()
