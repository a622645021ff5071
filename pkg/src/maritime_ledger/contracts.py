"""In-process state machines for the VesselRegistration, Notification and
EmissionData contracts, with role-based access and gas accounting.

Gas units per operation are the measured figures of the deployed contracts.
The gas price (30 gwei) and USD rate ($0.33 per token) are fitted to the
measured deployment costs, e.g. VesselRegistration at 0.01995 token and
$0.0066. Both are configurable.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from decimal import Decimal
from pathlib import Path
from typing import Iterable, Mapping

from .compliance import ComplianceResult, evaluate_sulfur
from .geofence import EcaAtlas, is_in_eca
from .model import GeoPosition, VesselIdentity, is_imo_number

WEI_PER_TOKEN = Decimal(10) ** 18


class ContractError(Exception):
    pass


class PermissionDenied(ContractError):
    pass


class StateError(ContractError):
    pass


class NotFound(ContractError, LookupError):
    pass


class SpoofingSuspected(ContractError):
    """Caller-supplied ECA status disagrees with the position's geofence result."""


class Role(str, enum.Enum):
    ADMIN = "admin"
    VESSEL_OWNER = "vessel_owner"
    CREW = "crew"
    FLAG_STATE = "flag_state"
    PORT_STATE = "port_state"


@dataclass(frozen=True)
class CallContext:
    caller_id: str
    role: Role

    def __post_init__(self):
        object.__setattr__(self, "role", Role(self.role))


class Op(str, enum.Enum):
    DEPLOY_VESSEL_REGISTRATION = "deploy:VesselRegistration"
    DEPLOY_NOTIFICATION = "deploy:Notification"
    DEPLOY_EMISSION_DATA = "deploy:EmissionData"
    REGISTER_VESSEL = "registerVessel"
    SET_PORT_STATE = "setPortState"
    RECORD_EMISSION_COMPLIANT = "recordEmission(Compliant)"
    RECORD_EMISSION_NON_COMPLIANT = "recordEmission(Non-Compliant)"


DEPLOY_OPS = (Op.DEPLOY_VESSEL_REGISTRATION, Op.DEPLOY_NOTIFICATION, Op.DEPLOY_EMISSION_DATA)
FUNCTION_OPS = (
    Op.REGISTER_VESSEL,
    Op.SET_PORT_STATE,
    Op.RECORD_EMISSION_COMPLIANT,
    Op.RECORD_EMISSION_NON_COMPLIANT,
)

DEFAULT_GAS_UNITS = {
    Op.DEPLOY_VESSEL_REGISTRATION: 665_106,
    Op.DEPLOY_NOTIFICATION: 1_188_150,
    Op.DEPLOY_EMISSION_DATA: 1_235_115,
    Op.REGISTER_VESSEL: 95_741,
    Op.SET_PORT_STATE: 49_077,
    Op.RECORD_EMISSION_COMPLIANT: 135_399,
    Op.RECORD_EMISSION_NON_COMPLIANT: 378_909,
}


# Actions permitted per role. Anything not listed is denied.
ACL: dict[str, frozenset[Role]] = {
    "installSensors": frozenset({Role.VESSEL_OWNER, Role.CREW}),
    "deployContracts": frozenset({Role.ADMIN, Role.VESSEL_OWNER, Role.FLAG_STATE}),
    "registerVessel": frozenset({Role.ADMIN}),
    "setPortState": frozenset({Role.ADMIN}),
    "recordEmission": frozenset({Role.VESSEL_OWNER}),
    "validateLedger": frozenset({Role.VESSEL_OWNER, Role.FLAG_STATE}),
    "getEmissionHistory": frozenset({Role.VESSEL_OWNER, Role.CREW, Role.FLAG_STATE}),
    "getNotifications": frozenset({Role.FLAG_STATE, Role.PORT_STATE}),
    "isVesselRegistered": frozenset(Role),
    "getFlagState": frozenset(Role),
    "getPortState": frozenset(Role),
}


def allowed(role: Role, action: str) -> bool:
    return Role(role) in ACL.get(action, frozenset())


def require(ctx: CallContext, action: str) -> None:
    if not allowed(ctx.role, action):
        raise PermissionDenied(f"role {ctx.role.value!r} may not call {action}")


@dataclass(frozen=True)
class GasReceipt:
    gas_units: int
    token_cost: Decimal
    usd_cost: Decimal

    @classmethod
    def zero(cls) -> "GasReceipt":
        return cls(0, Decimal(0), Decimal(0))

    def __add__(self, other: "GasReceipt") -> "GasReceipt":
        return GasReceipt(
            self.gas_units + other.gas_units,
            self.token_cost + other.token_cost,
            self.usd_cost + other.usd_cost,
        )

    def to_dict(self) -> dict:
        return {"gas": self.gas_units, "token": str(self.token_cost), "usd": str(self.usd_cost)}

    @classmethod
    def from_dict(cls, d: dict) -> "GasReceipt":
        return cls(int(d["gas"]), Decimal(d["token"]), Decimal(d["usd"]))


@dataclass(frozen=True)
class GasSchedule:
    units: Mapping[Op, int] = field(default_factory=lambda: dict(DEFAULT_GAS_UNITS))
    gas_price_wei: int = 30_000_000_000
    token_usd: Decimal = Decimal("0.33")

    def __post_init__(self):
        object.__setattr__(self, "units", {Op(k): int(v) for k, v in self.units.items()})
        object.__setattr__(self, "token_usd", Decimal(str(self.token_usd)))
        object.__setattr__(self, "gas_price_wei", int(self.gas_price_wei))
        if any(v <= 0 for v in self.units.values()) or self.gas_price_wei <= 0 or self.token_usd <= 0:
            raise ValueError("gas schedule entries must be positive")

    def receipt(self, gas_units: int) -> GasReceipt:
        token = Decimal(gas_units * self.gas_price_wei) / WEI_PER_TOKEN
        return GasReceipt(gas_units, token, token * self.token_usd)

    def with_price(self, gas_price_wei: int) -> "GasSchedule":
        return replace(self, gas_price_wei=gas_price_wei)


def charge_gas(schedule: GasSchedule, op_kind: Op | str | None) -> GasReceipt:
    """Price one operation; `None` stands for a read, which costs nothing."""
    if op_kind is None:
        return GasReceipt.zero()
    try:
        units = schedule.units[Op(op_kind)]
    except (ValueError, KeyError):
        raise KeyError(f"no gas entry for operation {op_kind!r}") from None
    return schedule.receipt(units)


@dataclass(frozen=True)
class NonComplianceNotification:
    vessel_imo: int
    message: str
    flag_state: str
    port_state: str
    timestamp: int
    compliance_id: str | None = None
    location: str | None = None

    def to_dict(self) -> dict:
        return {
            "vessel": self.vessel_imo,
            "message": self.message,
            "flag_state": self.flag_state,
            "port_state": self.port_state,
            "timestamp": self.timestamp,
            "compliance_id": self.compliance_id,
            "location": self.location,
        }


@dataclass(frozen=True)
class EmissionRecord:
    timestamp: int
    sulfur_content: float
    position: GeoPosition
    in_eca: bool
    compliant: bool
    compliance_id: str | None = None

    def to_dict(self) -> dict:
        return {
            "timestamp": self.timestamp,
            "sulfur": self.sulfur_content,
            "position": self.position.as_pair(),
            "in_eca": self.in_eca,
            "compliant": self.compliant,
            "compliance_id": self.compliance_id,
        }


@dataclass(frozen=True)
class CallRecord:
    """One state-changing call, in the form written to the call log."""

    seq: int
    caller: str
    role: Role
    op: str
    args: dict
    receipt: GasReceipt
    time: float = 0.0
    vessel: int | None = None

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "caller": self.caller,
            "role": Role(self.role).value,
            "op": self.op,
            "args": self.args,
            "receipt": self.receipt.to_dict(),
            "time": self.time,
            "vessel": self.vessel,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CallRecord":
        return cls(
            seq=int(d["seq"]),
            caller=d["caller"],
            role=Role(d["role"]),
            op=d["op"],
            args=dict(d["args"]),
            receipt=GasReceipt.from_dict(d["receipt"]),
            time=float(d["time"]),
            vessel=d.get("vessel"),
        )


class ContractWorld:
    """Combined state of the three contracts.

    Single writer: calls mutate in place and must be applied in block order.
    Failed calls raise and leave the state untouched.
    """

    def __init__(self, schedule: GasSchedule | None = None, atlas: EcaAtlas | None = None):
        self.schedule = schedule or GasSchedule()
        self.atlas = atlas
        self.deployed = False
        self.registry: dict[int, VesselIdentity] = {}
        self.port_states: dict[str, str] = {}
        self.notifications: list[NonComplianceNotification] = []
        self.emissions: dict[int, list[EmissionRecord]] = {}
        self.call_log: list[CallRecord] = []
        self.clock: float = 0.0

    # -- bookkeeping ---------------------------------------------------------

    def _log(self, ctx: CallContext, op: str, args: dict, receipt: GasReceipt, vessel=None) -> None:
        self.call_log.append(
            CallRecord(len(self.call_log), ctx.caller_id, ctx.role, op, args, receipt, self.clock, vessel)
        )

    def _require_deployed(self) -> None:
        if not self.deployed:
            raise StateError("contracts are not deployed")

    @property
    def total_receipt(self) -> GasReceipt:
        total = GasReceipt.zero()
        for rec in self.call_log:
            total = total + rec.receipt
        return total

    # -- deployment ----------------------------------------------------------

    def deploy_contracts(self, ctx: CallContext | None = None) -> dict[str, GasReceipt]:
        ctx = ctx or CallContext("admin", Role.ADMIN)
        require(ctx, "deployContracts")
        if self.deployed:
            raise StateError("contracts already deployed")
        receipts = {}
        for op in DEPLOY_OPS:
            receipt = charge_gas(self.schedule, op)
            self._log(ctx, op.value, {}, receipt)
            receipts[op.value.split(":", 1)[1]] = receipt
        self.deployed = True
        return receipts

    # -- VesselRegistration --------------------------------------------------

    def register_vessel(self, ctx: CallContext, imo: int, owner: str, flag: str) -> GasReceipt:
        require(ctx, "registerVessel")
        self._require_deployed()
        if not is_imo_number(imo):
            raise StateError(f"not a 7-digit IMO number: {imo!r}")
        if imo in self.registry:
            raise StateError(f"vessel {imo} is already registered")
        vessel = VesselIdentity(imo, owner, flag)
        receipt = charge_gas(self.schedule, Op.REGISTER_VESSEL)
        self.registry[imo] = vessel
        self._log(ctx, Op.REGISTER_VESSEL.value, {"imo": imo, "owner": owner, "flag": flag}, receipt, imo)
        return receipt

    def is_vessel_registered(self, imo: int) -> bool:
        return imo in self.registry

    def get_flag_state(self, imo: int) -> str:
        try:
            return self.registry[imo].flag_state
        except KeyError:
            raise NotFound(f"vessel {imo} is not registered") from None

    # -- Notification --------------------------------------------------------

    def set_port_state(
        self, ctx: CallContext, location: str, authority: str, vessel: int | None = None
    ) -> GasReceipt:
        """`vessel` only attributes the cost in the call log; it is not contract state."""
        require(ctx, "setPortState")
        self._require_deployed()
        receipt = charge_gas(self.schedule, Op.SET_PORT_STATE)
        self.port_states[location] = authority
        self._log(ctx, Op.SET_PORT_STATE.value, {"location": location, "authority": authority}, receipt, vessel)
        return receipt

    def get_port_state(self, location: str) -> str:
        return self.port_states.get(location, "")

    def report_non_compliance(
        self,
        vessel: int,
        message: str,
        flag: str,
        port: str,
        timestamp: int = 0,
        compliance_id: str | None = None,
        location: str | None = None,
    ) -> NonComplianceNotification:
        """Append a notification. Called by `record_emission`, never by users."""
        note = NonComplianceNotification(vessel, message, flag, port, timestamp, compliance_id, location)
        self.notifications.append(note)
        return note

    def get_notifications(self, ctx: CallContext) -> list[NonComplianceNotification]:
        require(ctx, "getNotifications")
        return list(self.notifications)

    # -- EmissionData --------------------------------------------------------

    def record_emission(
        self,
        ctx: CallContext,
        imo: int,
        sulfur: float,
        position: GeoPosition,
        in_eca: bool | None = None,
        location: str | None = None,
        timestamp: int = 0,
        compliance_id: str | None = None,
    ) -> tuple[ComplianceResult, GasReceipt]:
        require(ctx, "recordEmission")
        self._require_deployed()
        if imo not in self.registry:
            raise NotFound(f"vessel {imo} is not registered")
        if ctx.caller_id != self.registry[imo].owner:
            raise PermissionDenied(f"{ctx.caller_id!r} does not own vessel {imo}")
        if not (isinstance(sulfur, (int, float)) and math.isfinite(sulfur)) or sulfur < 0:
            raise ContractError(f"sulfur content must be finite and non-negative, got {sulfur!r}")
        if self.atlas is not None:
            fenced, _ = is_in_eca(position, self.atlas)
            if in_eca is None:
                in_eca = fenced
            elif in_eca != fenced:
                raise SpoofingSuspected(
                    f"vessel {imo}: reported in_eca={in_eca} but position {position.as_pair()} gives {fenced}"
                )
        if in_eca is None:
            raise ContractError("in_eca must be supplied when no atlas is configured")

        result = evaluate_sulfur(float(sulfur), bool(in_eca))
        op = Op.RECORD_EMISSION_COMPLIANT if result.compliant else Op.RECORD_EMISSION_NON_COMPLIANT
        receipt = charge_gas(self.schedule, op)
        record = EmissionRecord(timestamp, float(sulfur), position, bool(in_eca), result.compliant, compliance_id)
        self.emissions.setdefault(imo, []).append(record)
        if not result.compliant:
            self.report_non_compliance(
                imo,
                result.message,
                self.registry[imo].flag_state,
                self.get_port_state(location) if location else "",
                timestamp,
                compliance_id,
                location,
            )
        args = {
            "imo": imo,
            "sulfur": float(sulfur),
            "position": position.as_pair(),
            "in_eca": bool(in_eca),
            "location": location,
            "timestamp": timestamp,
            "compliance_id": compliance_id,
        }
        self._log(ctx, op.value, args, receipt, imo)
        return result, receipt

    def get_emission_history(self, ctx: CallContext, imo: int) -> list[EmissionRecord]:
        require(ctx, "getEmissionHistory")
        if imo not in self.registry:
            raise NotFound(f"vessel {imo} is not registered")
        return list(self.emissions.get(imo, []))


def deploy_contracts(world: ContractWorld, ctx: CallContext | None = None) -> dict[str, GasReceipt]:
    return world.deploy_contracts(ctx)


def replay(records: Iterable[CallRecord], schedule: GasSchedule | None = None, atlas: EcaAtlas | None = None) -> ContractWorld:
    """Rebuild a world by re-applying a call log from an empty state.

    Each call is re-executed and its receipt must match the logged one.
    """
    world = ContractWorld(schedule, atlas)
    base = world.schedule
    for rec in records:
        ctx = CallContext(rec.caller, rec.role)
        world.clock = rec.time
        a = rec.args
        if rec.receipt.gas_units:
            # calls may have been priced individually (ambient gas price)
            price = rec.receipt.token_cost * WEI_PER_TOKEN / rec.receipt.gas_units
            world.schedule = base.with_price(int(price))
        if rec.op.startswith("deploy:"):
            if not world.deployed:
                world.deploy_contracts(ctx)
            continue
        if rec.op == Op.REGISTER_VESSEL.value:
            world.register_vessel(ctx, a["imo"], a["owner"], a["flag"])
        elif rec.op == Op.SET_PORT_STATE.value:
            world.set_port_state(ctx, a["location"], a["authority"], rec.vessel)
        elif rec.op in (Op.RECORD_EMISSION_COMPLIANT.value, Op.RECORD_EMISSION_NON_COMPLIANT.value):
            world.record_emission(
                ctx, a["imo"], a["sulfur"], GeoPosition(*a["position"]), a["in_eca"],
                a["location"], a["timestamp"], a["compliance_id"],
            )
        else:
            raise ContractError(f"call {rec.seq}: unknown operation {rec.op!r}")
        if world.call_log[-1].receipt != rec.receipt:
            raise ContractError(f"call {rec.seq}: replayed receipt differs from the logged one")
    world.schedule = base
    return world


def write_call_log(records: Iterable[CallRecord], path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), sort_keys=True, separators=(",", ":")) + "\n")


def read_call_log(path) -> list[CallRecord]:
    records = []
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(CallRecord.from_dict(json.loads(line)))
        except (ValueError, KeyError, TypeError) as exc:
            raise ContractError(f"{path}:{n}: bad call record: {exc}") from None
    return records
