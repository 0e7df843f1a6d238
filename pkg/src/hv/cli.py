"""Command line entry points: check, watch, diff, serve, simulate.

Exit codes: 0 success / nothing at or above the failure threshold,
1 findings (or simulation equivalence failure), 2 operational error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import threading
import time

from hv import canonical, sim
from hv.diffing import diff, serialize_events
from hv.engine import Engine, full_check
from hv.errors import HvError
from hv.model import Model, element_path
from hv.rules import RULE_IDS, severity_rank, Severity
from hv.service import DEFAULT_PORT, run_serve

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_ERROR = 2


class CliError(Exception):
    """Operational failure; message goes to stderr, exit code 2."""


def _load_model(path: str, *, lenient: bool = False) -> Model:
    try:
        report = canonical.parse_path(path, lenient=lenient)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from None
    except ValueError as exc:
        raise CliError(str(exc)) from None
    for warning in report.warnings:
        print(f"warning: {warning.path}: {warning.message}", file=sys.stderr)
    if report.fatal is not None:
        raise CliError(f"{path}: {report.fatal.path}: {report.fatal.message}")
    return report.model


def render_diagnostic(model: Model, diag) -> str:
    location = element_path(model, diag.element_id)
    return f"{diag.severity.value.upper()} {diag.rule_id} {location}: {diag.message}"


def _parse_rules_filter(raw: str | None) -> list[str] | None:
    if raw is None:
        return None
    rule_ids = [part.strip() for part in raw.split(",") if part.strip()]
    unknown = [r for r in rule_ids if r not in RULE_IDS]
    if unknown:
        raise CliError(f"unknown rule ids: {', '.join(unknown)}")
    return rule_ids


def _exceeds(diagnostics, fail_on: str) -> bool:
    if fail_on == "never":
        return False
    threshold = severity_rank(Severity(fail_on))
    return any(severity_rank(d.severity) >= threshold for d in diagnostics)


def _cmd_check(args) -> int:
    model = _load_model(args.path, lenient=args.lenient)
    diagnostics = full_check(model, _parse_rules_filter(args.rules))
    if args.format == "ndjson":
        for diag in diagnostics:
            print(json.dumps(diag.to_dict(), separators=(",", ":"), ensure_ascii=False))
    else:
        for diag in diagnostics:
            print(render_diagnostic(model, diag))
    return EXIT_FINDINGS if _exceeds(diagnostics, args.fail_on) else EXIT_OK


def _cmd_diff(args) -> int:
    before = _load_model(args.before)
    after = _load_model(args.after)
    if before.model_id != after.model_id:
        if not args.force_id:
            raise CliError(
                f"model ids differ ({before.model_id!r} vs {after.model_id!r}); "
                "pass --force-id to diff anyway"
            )
        before = dataclasses.replace(before, model_id=after.model_id)
    events = diff(before, after)
    sys.stdout.write(serialize_events(events))
    return EXIT_FINDINGS if events else EXIT_OK


def watch_file(
    path: str,
    *,
    debounce_ms: int = 200,
    poll_ms: int = 50,
    emit=print,
    stop_event: threading.Event | None = None,
    max_batches: int | None = None,
) -> int:
    """Poll a model file and emit diagnostic deltas as it changes.

    Prints a full report first, then one ``+``/``-`` line per changed
    diagnostic after each debounced edit.  A transiently malformed save is
    reported as a warning and the previous state is kept.  Runs until
    ``stop_event`` is set (or forever; ``max_batches`` is a test hook).
    """
    with open(path, "rb") as handle:
        processed = handle.read()
    report = canonical.parse_path(path)
    if report.fatal is not None:
        raise CliError(f"{path}: {report.fatal.path}: {report.fatal.message}")
    engine = Engine(report.model)
    for diag in engine.current():
        emit(render_diagnostic(engine.snapshot, diag))

    pending: bytes | None = None
    pending_at = 0.0
    batches = 0
    while stop_event is None or not stop_event.is_set():
        time.sleep(poll_ms / 1000.0)
        try:
            with open(path, "rb") as handle:
                data = handle.read()
        except OSError:
            continue
        if data != processed and data != pending:
            pending = data
            pending_at = time.monotonic()
        if pending is None or (time.monotonic() - pending_at) * 1000.0 < debounce_ms:
            continue
        data, pending = pending, None
        if data == processed:
            continue
        processed = data
        batches += 1
        report = canonical.parse_path(path)
        if report.fatal is not None:
            emit(f"warning: parse failed ({report.fatal.message}); keeping previous state")
        elif report.model.model_id != engine.snapshot.model_id:
            emit(
                f"warning: model id changed to {report.model.model_id!r}; "
                "keeping previous state"
            )
        else:
            old_snapshot = engine.snapshot
            events = diff(old_snapshot, report.model, first_seq=engine.last_seq + 1)
            delta = engine.process(events)
            for diag in delta.removed:
                emit(f"- {render_diagnostic(old_snapshot, diag)}")
            for diag in delta.added:
                emit(f"+ {render_diagnostic(engine.snapshot, diag)}")
        if max_batches is not None and batches >= max_batches:
            break
    return EXIT_OK


def _cmd_watch(args) -> int:
    try:
        return watch_file(args.path, debounce_ms=args.debounce_ms)
    except KeyboardInterrupt:
        return EXIT_OK


def _cmd_serve(args) -> int:
    port = args.port if args.port is not None else int(os.environ.get("HV_PORT", DEFAULT_PORT))
    try:
        run_serve(port=port, host=args.host)
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def _parse_edit_mix(raw: str | None) -> dict | None:
    if raw is None:
        return None
    mix: dict[str, int] = {}
    for part in raw.split(","):
        part = part.strip()
        if not part:
            continue
        key, _, value = part.partition("=")
        try:
            mix[key.strip()] = int(value)
        except ValueError:
            raise CliError(f"bad edit-mix entry {part!r}; expected kind=weight") from None
    return mix


def _cmd_simulate(args) -> int:
    params = sim.SimParams(
        seed=args.seed,
        classes=args.classes,
        ops_per_class=(args.ops_min, args.ops_max),
        interactions=args.interactions,
        messages_per_interaction=(args.messages_min, args.messages_max),
        steps=args.steps,
        batch_size=(args.batch_min, args.batch_max),
        inject_fault_step=args.inject_fault,
    )
    mix = _parse_edit_mix(args.edit_mix)
    if mix is not None:
        params.edit_mix = mix
    try:
        params.validate()
    except ValueError as exc:
        raise CliError(str(exc)) from None
    report = sim.verify_equivalence(params)
    if args.json:
        sys.stdout.write(sim.report_json(report))
    else:
        print(report.to_text())
    return EXIT_OK if report.equivalence_ok else EXIT_FINDINGS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hv",
        description="Consistency checks between UML class and sequence diagrams.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="batch-check one model file")
    check.add_argument("path", help="model file (.hvm.json canonical, .uml XMI)")
    check.add_argument("--format", choices=("text", "ndjson"), default="text")
    check.add_argument("--rules", help="comma-separated rule ids to run")
    check.add_argument("--fail-on", choices=("never", "error", "warning"), default="error")
    check.add_argument("--lenient", action="store_true", help="downgrade schema strictness to warnings")
    check.set_defaults(func=_cmd_check)

    watch = sub.add_parser("watch", help="watch a model file and print diagnostic deltas")
    watch.add_argument("path")
    watch.add_argument("--debounce-ms", type=int, default=200)
    watch.set_defaults(func=_cmd_watch)

    diff_cmd = sub.add_parser("diff", help="diff two model files into change events")
    diff_cmd.add_argument("before")
    diff_cmd.add_argument("after")
    diff_cmd.add_argument("--force-id", action="store_true", help="diff across differing model ids")
    diff_cmd.set_defaults(func=_cmd_diff)

    serve = sub.add_parser("serve", help="run the HTTP gateway")
    serve.add_argument("--port", type=int, default=None, help=f"default $HV_PORT or {DEFAULT_PORT}")
    serve.add_argument("--host", default="127.0.0.1")
    serve.set_defaults(func=_cmd_serve)

    simulate = sub.add_parser("simulate", help="seeded incremental-vs-batch equivalence run")
    simulate.add_argument("--seed", type=int, default=42)
    simulate.add_argument("--steps", type=int, default=200)
    simulate.add_argument("--classes", type=int, default=30)
    simulate.add_argument("--interactions", type=int, default=8)
    simulate.add_argument("--ops-min", type=int, default=1)
    simulate.add_argument("--ops-max", type=int, default=6)
    simulate.add_argument("--messages-min", type=int, default=2)
    simulate.add_argument("--messages-max", type=int, default=10)
    simulate.add_argument("--batch-min", type=int, default=1)
    simulate.add_argument("--batch-max", type=int, default=4)
    simulate.add_argument("--edit-mix", help="weights, e.g. renameOp=3,addMsg=1")
    simulate.add_argument("--json", action="store_true")
    simulate.add_argument("--inject-fault", type=int, default=None, metavar="STEP",
                          help="test mode: corrupt the comparison at STEP")
    simulate.set_defaults(func=_cmd_simulate)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=getattr(logging, os.environ.get("HV_LOG", "WARNING").upper(), logging.WARNING),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except HvError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
