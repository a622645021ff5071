"""Command-line entry point: ``maritime-ledger {run,verify,inspect,report}``.

Exit codes:
  0  success
  1  runtime error
  2  configuration, I/O or corrupt-file error
  3  ledger failed verification (tampering detected)
  4  unknown vessel
  5  permission denied for the requested view
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .contracts import CallContext, ContractError, PermissionDenied, Role, allowed, read_call_log, replay
from .ledger import LedgerError, LedgerFormatError, load, verify_chain
from .reporting import cost_report, render_csv, render_text
from .simnet import CALLS_FILE, ScenarioError, Simulation, load_scenario

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_TAMPERED = 3
EXIT_UNKNOWN_VESSEL = 4
EXIT_DENIED = 5

OUT_DIR_ENV = "MARITIME_LEDGER_OUT"


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _calls_path(args) -> Path:
    if args.calls:
        return Path(args.calls)
    if args.ledger:
        return Path(args.ledger).with_name(CALLS_FILE)
    raise FileNotFoundError("no call log given (use --calls or --ledger)")


def cmd_run(args) -> int:
    if not args.scenario:
        _err("run: --scenario is required")
        return EXIT_CONFIG
    try:
        scenario = load_scenario(args.scenario)
    except FileNotFoundError:
        _err(f"run: scenario file not found: {args.scenario}")
        return EXIT_CONFIG
    except ScenarioError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except OSError as exc:
        _err(f"run: {exc}")
        return EXIT_CONFIG
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.epsilon is not None or args.gamma is not None:
        try:
            overrides["consistency"] = replace(
                scenario.consistency,
                **{k: v for k, v in (("epsilon", args.epsilon), ("gamma", args.gamma)) if v is not None},
            )
        except ValueError as exc:
            _err(f"run: {exc}")
            return EXIT_CONFIG
    scenario = scenario.with_overrides(**overrides)
    out_dir = args.out or os.environ.get(OUT_DIR_ENV) or "run-output"
    try:
        sim = Simulation(scenario).run()
        files = sim.write_outputs(out_dir)
    except OSError as exc:
        _err(f"run: cannot write outputs: {exc}")
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - surfaced as exit code 1
        _err(f"run: simulation failed: {exc}")
        return EXIT_RUNTIME
    m = sim.metrics
    print(
        f"blocks={m.blocks_produced} rejected={m.blocks_rejected} tx={m.tx_committed}/{m.tx_submitted} "
        f"notifications={m.notifications} height={sim.chain.height}"
    )
    for path in files.values():
        print(path)
    return EXIT_OK


def cmd_verify(args) -> int:
    if not args.ledger:
        _err("verify: --ledger is required")
        return EXIT_CONFIG
    try:
        chain = load(args.ledger)
    except LedgerFormatError as exc:
        print(f"CORRUPT first_bad_height={exc.height} ({exc})")
        return EXIT_CONFIG
    except LedgerError as exc:
        _err(f"verify: corrupt ledger: {exc}")
        return EXIT_CONFIG
    except OSError as exc:
        _err(f"verify: {exc}")
        return EXIT_CONFIG
    fault = verify_chain(chain)
    if fault is not None:
        print(f"TAMPERED first_bad_height={fault.height} ({fault.reason})")
        return EXIT_TAMPERED
    print(f"OK height={chain.height} blocks={len(chain)}")
    return EXIT_OK


def _fmt_record(rec, on_ledger: bool) -> str:
    lat, lon = rec.position.as_pair()
    return (
        f"  t={rec.timestamp:<5} sulfur={rec.sulfur_content:.6f}%  pos=({lat:.6f}, {lon:.6f})  "
        f"{'ECA' if rec.in_eca else 'non-ECA':<7} {'compliant' if rec.compliant else 'NON-COMPLIANT':<13} "
        f"id={rec.compliance_id} {'[on ledger]' if on_ledger else '[NOT ON LEDGER]'}"
    )


def cmd_inspect(args) -> int:
    if not args.ledger:
        _err("inspect: --ledger is required")
        return EXIT_CONFIG
    try:
        chain = load(args.ledger)
        world = replay(read_call_log(_calls_path(args)))
    except (LedgerError, ContractError, OSError, ValueError) as exc:
        _err(f"inspect: {exc}")
        return EXIT_CONFIG
    role = Role(args.role)
    ctx = CallContext(f"cli:{role.value}", role)
    on_ledger = {e.compliance_id.hex for e in chain.entries()}

    if args.vessel is not None:
        if not world.is_vessel_registered(args.vessel):
            _err(f"inspect: unknown vessel {args.vessel}")
            return EXIT_UNKNOWN_VESSEL
        vessels = [args.vessel]
        try:
            histories = {args.vessel: world.get_emission_history(ctx, args.vessel)}
        except PermissionDenied as exc:
            print(f"permission denied: {exc}")
            return EXIT_DENIED
    else:
        vessels = sorted(world.registry)
        histories = (
            {imo: world.get_emission_history(ctx, imo) for imo in vessels}
            if allowed(role, "getEmissionHistory")
            else {}
        )
    notes = world.get_notifications(ctx) if allowed(role, "getNotifications") else None
    if not histories and notes is None:
        print(f"permission denied: role {role.value!r} may view neither emission history nor notifications")
        return EXIT_DENIED

    for imo in vessels:
        if imo not in histories:
            continue
        v = world.registry[imo]
        print(f"Vessel {imo} (owner {v.owner}, flag {v.flag_state})")
        print(f"Emission history ({len(histories[imo])} records):")
        for rec in histories[imo]:
            print(_fmt_record(rec, rec.compliance_id in on_ledger))
    if notes is not None:
        if args.vessel is not None:
            notes = [n for n in notes if n.vessel_imo == args.vessel]
        print(f"Notifications ({len(notes)}):")
        for n in notes:
            print(
                f"  t={n.timestamp:<5} vessel={n.vessel_imo} {n.message!r} flag={n.flag_state} "
                f"port={n.port_state or '-'} id={n.compliance_id}"
            )
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        records = read_call_log(_calls_path(args))
    except (ContractError, OSError) as exc:
        _err(f"report: {exc}")
        return EXIT_CONFIG
    report = cost_report(records)
    sys.stdout.write(render_csv(report) if args.format == "csv" else render_text(report))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maritime-ledger", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log simulation details to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a fleet scenario and write ledger, call log, metrics and mailboxes")
    p.add_argument("--scenario")
    p.add_argument("--out", help=f"output directory (default ${OUT_DIR_ENV} or ./run-output)")
    p.add_argument("--seed", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--gamma", type=float)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="recompute hashes and links of a ledger file")
    p.add_argument("--ledger")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("inspect", help="show emission history and notifications as a given role")
    p.add_argument("--ledger")
    p.add_argument("--calls", help="call log (default: calls.jsonl next to the ledger)")
    p.add_argument("--vessel", type=int)
    p.add_argument("--as", dest="role", choices=[r.value for r in Role], default=Role.FLAG_STATE.value)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("report", help="gas cost tables from a call log")
    p.add_argument("--ledger")
    p.add_argument("--calls", help="call log (default: calls.jsonl next to the ledger)")
    p.add_argument("--format", choices=["text", "csv"], default="text")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
