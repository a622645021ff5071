"""Gas cost tables aggregated from a call log."""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Sequence

from .contracts import DEPLOY_OPS, FUNCTION_OPS, CallRecord, GasReceipt, GasSchedule, Op

SECONDS_PER_DAY = 86_400
UPLOAD_OPS = {Op.SET_PORT_STATE.value, Op.RECORD_EMISSION_COMPLIANT.value, Op.RECORD_EMISSION_NON_COMPLIANT.value}
RECORD_OPS = {Op.RECORD_EMISSION_COMPLIANT.value, Op.RECORD_EMISSION_NON_COMPLIANT.value}


def round_half_up(x: Decimal, places: int) -> Decimal:
    return Decimal(x).quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_UP)


@dataclass(frozen=True)
class CostRow:
    label: str
    calls: int
    total: GasReceipt

    @property
    def gas_per_call(self) -> int:
        return self.total.gas_units // self.calls if self.calls else 0

    @property
    def token_per_call(self) -> Decimal:
        return self.total.token_cost / self.calls if self.calls else Decimal(0)

    @property
    def usd_per_call(self) -> Decimal:
        return self.total.usd_cost / self.calls if self.calls else Decimal(0)


@dataclass(frozen=True)
class VesselCost:
    """Upload costs of one vessel (setPortState + recordEmission, no registration).

    `rounded_usd` rounds each upload to whole tenths of a cent after adding
    the one-off registerVessel charge. That gives $0.003 per compliant and
    $0.005 per non-compliant upload.
    """

    vessel: int
    uploads: int
    days: int
    exact_usd: Decimal
    rounded_usd: Decimal

    @property
    def exact_daily_usd(self) -> Decimal:
        return self.exact_usd / self.days if self.days else Decimal(0)

    @property
    def rounded_daily_usd(self) -> Decimal:
        return self.rounded_usd / self.days if self.days else Decimal(0)


@dataclass(frozen=True)
class CostReport:
    deployment: tuple[CostRow, ...]
    functions: tuple[CostRow, ...]
    vessels: tuple[VesselCost, ...] = field(default=())

    @property
    def deployment_total(self) -> GasReceipt:
        return _sum(r.total for r in self.deployment)

    @property
    def functions_total(self) -> GasReceipt:
        return _sum(r.total for r in self.functions)

    @property
    def grand_total(self) -> GasReceipt:
        return self.deployment_total + self.functions_total


def _sum(receipts: Iterable[GasReceipt]) -> GasReceipt:
    total = GasReceipt.zero()
    for r in receipts:
        total = total + r
    return total


def _rows(records: Sequence[CallRecord], ops: Sequence[Op], strip_prefix: bool = False) -> tuple[CostRow, ...]:
    rows = []
    for op in ops:
        mine = [r for r in records if r.op == op.value]
        label = op.value.split(":", 1)[1] if strip_prefix else op.value
        rows.append(CostRow(label, len(mine), _sum(r.receipt for r in mine)))
    return tuple(rows)


def vessel_costs(records: Sequence[CallRecord], schedule: GasSchedule | None = None) -> tuple[VesselCost, ...]:
    schedule = schedule or GasSchedule()
    register_units = schedule.units[Op.REGISTER_VESSEL]
    uploads: dict[int, list[tuple[CallRecord, int]]] = defaultdict(list)
    pending_port: dict[int, CallRecord] = {}
    for rec in records:
        if rec.vessel is None or rec.op not in UPLOAD_OPS:
            continue
        if rec.op == Op.SET_PORT_STATE.value:
            pending_port[rec.vessel] = rec
            continue
        port = pending_port.pop(rec.vessel, None)
        extra = port.receipt.gas_units if port else 0
        uploads[rec.vessel].append((rec, extra))

    out = []
    for vessel in sorted(uploads):
        exact = Decimal(0)
        rounded = Decimal(0)
        days = set()
        for rec, port_gas in uploads[vessel]:
            usd_per_gas = rec.receipt.usd_cost / rec.receipt.gas_units
            exact += usd_per_gas * (rec.receipt.gas_units + port_gas)
            rounded += round_half_up(usd_per_gas * (rec.receipt.gas_units + port_gas + register_units), 3)
            days.add(int(rec.time // SECONDS_PER_DAY))
        out.append(VesselCost(vessel, len(uploads[vessel]), len(days), exact, rounded))
    return tuple(out)


def cost_report(records: Iterable[CallRecord], schedule: GasSchedule | None = None) -> CostReport:
    records = list(records)
    return CostReport(
        deployment=_rows(records, DEPLOY_OPS, strip_prefix=True),
        functions=_rows(records, FUNCTION_OPS),
        vessels=vessel_costs(records, schedule),
    )


def render_text(report: CostReport) -> str:
    lines = []

    def table(title, rows, total):
        lines.append(title)
        lines.append(f"{'Operation':<32}{'Calls':>7}{'Gas/call':>12}{'Token/call':>13}{'USD/call':>11}{'Total gas':>13}{'Total token':>14}{'Total USD':>12}")
        for r in rows:
            lines.append(
                f"{r.label:<32}{r.calls:>7}{r.gas_per_call:>12,}{round_half_up(r.token_per_call, 5):>13}"
                f"{'$' + str(round_half_up(r.usd_per_call, 4)):>11}{r.total.gas_units:>13,}"
                f"{round_half_up(r.total.token_cost, 4):>14}{'$' + str(round_half_up(r.total.usd_cost, 4)):>12}"
            )
        lines.append(
            f"{'Total':<32}{'':>7}{'':>12}{'':>13}{'':>11}{total.gas_units:>13,}"
            f"{round_half_up(total.token_cost, 4):>14}{'$' + str(round_half_up(total.usd_cost, 4)):>12}"
        )
        lines.append("")

    table("Contract deployment", report.deployment, report.deployment_total)
    table("Contract functions", report.functions, report.functions_total)
    lines.append("Per-vessel daily upload cost")
    lines.append(f"{'Vessel':<10}{'Uploads':>9}{'Days':>6}{'Exact USD/day':>16}{'Rounded USD/day':>18}")
    for v in report.vessels:
        lines.append(
            f"{v.vessel:<10}{v.uploads:>9}{v.days:>6}{'$' + str(round_half_up(v.exact_daily_usd, 4)):>16}"
            f"{'$' + str(round_half_up(v.rounded_daily_usd, 3)):>18}"
        )
    if not report.vessels:
        lines.append("(none)")
    return "\n".join(lines) + "\n"


CSV_FIELDS = ["section", "operation", "calls", "gas_per_call", "token_per_call", "usd_per_call", "total_gas", "total_token", "total_usd"]


def render_csv(report: CostReport) -> str:
    """Full-precision CSV; vessel rows put daily figures in the per-call columns."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for section, rows, total in (
        ("deployment", report.deployment, report.deployment_total),
        ("function", report.functions, report.functions_total),
    ):
        for r in rows:
            w.writerow([section, r.label, r.calls, r.gas_per_call, r.token_per_call, r.usd_per_call,
                        r.total.gas_units, r.total.token_cost, r.total.usd_cost])
        w.writerow([section, "TOTAL", sum(r.calls for r in rows), "", "", "", total.gas_units, total.token_cost, total.usd_cost])
    for v in report.vessels:
        w.writerow(["vessel_daily_exact", v.vessel, v.uploads, "", "", v.exact_daily_usd, "", "", v.exact_usd])
        w.writerow(["vessel_daily_rounded", v.vessel, v.uploads, "", "", v.rounded_daily_usd, "", "", v.rounded_usd])
    return buf.getvalue()
