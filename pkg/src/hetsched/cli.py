"""Command-line entry point.

Grammar:
    hetsched <solve|enumerate|validate|prompt|eval|report>
             [--scenario PATH|builtin] [--mode aware|relaxed]
             [--out PATH] [--format csv|json|txt] [--config PATH]

Exit status: 0 on success (found violations are results, not failures),
1 on domain errors, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .harness import (
    configs_from_json,
    records_from_json,
    render_prompt,
    run_eval,
    write_report,
)
from .scenario import (
    Scenario,
    ScenarioError,
    builtin_scenario,
    parse_scenario,
    validate_scenario,
)
from .semantics import Schedule, ScheduleError, SimMode, schedule_to_json
from .solvers import EnumerationLimitError, enumerate_table, enumeration_csv, solve_exact
from .timefmt import clock_str, units_str
from .validator import claim_from_json, validate_schedule

GANTT_QUANTUM_MS = 600_000  # ten minutes per cell


class UsageError(Exception):
    """Bad invocation; message carries a remediation hint."""


def _mode(value: str) -> SimMode:
    return SimMode.CAPACITY_AWARE if value == "aware" else SimMode.CAPACITY_RELAXED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hetsched",
        description="Transfer-aware DAG scheduling toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, mode=False, fmt=None):
        p.add_argument("--scenario", default="builtin", metavar="PATH|builtin")
        if mode:
            p.add_argument("--mode", choices=["aware", "relaxed"], default="aware")
        p.add_argument("--out", metavar="PATH")
        if fmt:
            p.add_argument("--format", choices=fmt, default=fmt[0])

    common(sub.add_parser("solve", help="print the optimal schedule and Gantt chart"), mode=True)
    common(sub.add_parser("enumerate", help="write the per-assignment table as CSV"), mode=True)
    validate = sub.add_parser("validate", help="check a schedule or claim file")
    validate.add_argument("schedule_file", metavar="SCHEDULE_JSON")
    common(validate, fmt=["txt", "json"])
    common(sub.add_parser("prompt", help="render the benchmark prompt"))
    evalp = sub.add_parser("eval", help="query configured models and score answers")
    evalp.add_argument("--config", required=True, metavar="PATH")
    common(evalp)
    report = sub.add_parser("report", help="re-render a saved records file")
    report.add_argument("records_file", metavar="RECORDS_JSON")
    common(report, fmt=["txt", "csv", "json"])
    return parser


def _read_file(path: str, what: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise UsageError(f"file not found: {path} (pass an existing {what})") from None


def _load_scenario_arg(value: str) -> Scenario:
    if value == "builtin":
        return builtin_scenario()
    text = _read_file(value, "scenario JSON file, or 'builtin'")
    scenario = parse_scenario(text)
    defects = validate_scenario(scenario)
    if defects:
        details = "; ".join(d.detail for d in defects)
        raise ScenarioError(f"{value}: {details}")
    return scenario


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def render_gantt(schedule: Schedule, scenario: Scenario, quantum_ms: int = GANTT_QUANTUM_MS) -> str:
    """One row per node, one cell per quantum; transfers listed below."""
    symbols = "123456789abcdefghijklmnopqrstuvwxyz"
    tasks = sorted({p.task for p in schedule.placements})
    mark = {task: symbols[i % len(symbols)] for i, task in enumerate(tasks)}
    columns = max(1, -(-schedule.makespan_ms // quantum_ms))
    width = max(len(n.id) for n in scenario.nodes)
    lines = [f"one cell = {units_str(quantum_ms)}"]
    for node in scenario.nodes:
        cells = []
        for col in range(columns):
            lo, hi = col * quantum_ms, (col + 1) * quantum_ms
            running = [
                p.task
                for p in schedule.placements
                if p.node == node.id and p.start_ms < hi and p.end_ms > lo
            ]
            if not running:
                cells.append(".")
            elif len(running) == 1:
                cells.append(mark[running[0]])
            else:
                cells.append("#")
        lines.append(f"{node.id.ljust(width)} |{''.join(cells)}|")
    for task in tasks:
        p = schedule.placement(task)
        lines.append(
            f"  {mark[task]} = {task} on {p.node}"
            f"  {clock_str(p.start_ms)} .. {clock_str(p.end_ms)}"
        )
    moved = [t for t in schedule.transfers if t.duration_ms > 0]
    if moved:
        lines.append("transfers:")
        for t in moved:
            lines.append(
                f"  {t.producer} -> {t.consumer}: {t.src} -> {t.dst},"
                f" departs {clock_str(t.depart_ms)}, arrives {clock_str(t.arrive_ms)}"
            )
    return "\n".join(lines) + "\n"


def _cmd_solve(args) -> int:
    scenario = _load_scenario_arg(args.scenario)
    schedule = solve_exact(scenario, _mode(args.mode))
    out = [f"makespan {units_str(schedule.makespan_ms)}"]
    for p in schedule.placements:
        out.append(
            f"{p.task} -> {p.node}  start {clock_str(p.start_ms)}  end {clock_str(p.end_ms)}"
        )
    out.append("")
    out.append(render_gantt(schedule, scenario).rstrip("\n"))
    sys.stdout.write("\n".join(out) + "\n")
    if args.out:
        Path(args.out).write_text(schedule_to_json(schedule), encoding="utf-8")
    return 0


def _cmd_enumerate(args) -> int:
    scenario = _load_scenario_arg(args.scenario)
    rows = enumerate_table(scenario, _mode(args.mode))
    _emit(enumeration_csv(rows, scenario), args.out)
    return 0


def _cmd_validate(args) -> int:
    scenario = _load_scenario_arg(args.scenario)
    text = _read_file(args.schedule_file, "schedule/claim JSON file")
    try:
        claim = claim_from_json(text)
    except (ValueError, KeyError) as exc:
        raise UsageError(f"{args.schedule_file}: {exc}") from exc
    report = validate_schedule(claim, scenario)
    if args.format == "json":
        _emit(json.dumps(report.to_json_obj(), indent=2) + "\n", args.out)
        return 0
    lines = [f"adherent: {'yes' if report.adherent else 'no'}"]
    if report.recomputed_makespan_ms is not None:
        lines.append(f"recomputed makespan: {units_str(report.recomputed_makespan_ms)}")
    for violation in report.violations:
        lines.append(f"violation [{violation.kind.value}] {violation.detail}")
    for note in report.notes:
        lines.append(f"note: {note}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_prompt(args) -> int:
    scenario = _load_scenario_arg(args.scenario)
    _emit(render_prompt(scenario), args.out)
    return 0


def _cmd_eval(args) -> int:
    scenario = _load_scenario_arg(args.scenario)
    configs = configs_from_json(_read_file(args.config, "model config JSON file"))
    out_dir = args.out or "eval_out"
    records = run_eval(scenario, configs, out_dir)
    sys.stdout.write(write_report(records, "txt"))
    sys.stdout.write(f"artifacts written under {out_dir}\n")
    return 0


def _cmd_report(args) -> int:
    records = records_from_json(_read_file(args.records_file, "records JSON file"))
    _emit(write_report(records, args.format), args.out)
    return 0


_COMMANDS = {
    "solve": _cmd_solve,
    "enumerate": _cmd_enumerate,
    "validate": _cmd_validate,
    "prompt": _cmd_prompt,
    "eval": _cmd_eval,
    "report": _cmd_report,
}


def dispatch(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ScenarioError, ScheduleError, EnumerationLimitError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
