"""Benchmark harness: render the scheduling prompt, query chat-completion
endpoints, parse free-text schedule answers, and score them against the
analytical optimum.

Scoring is pure: a record's band and adherence depend only on the parsed
content, the scenario, and the optimum, never on the model name or how fast
the endpoint answered.  Each model is queried exactly once per run; there is
no prompt-refinement loop.
"""

from __future__ import annotations

import json
import os
import re
import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import requests

from .scenario import Scenario, rational_json
from .semantics import SimMode
from .solvers import solve_exact
from .timefmt import MS_PER_HOUR, find_duration, parse_duration, units_str
from .validator import (
    Band,
    ClaimRow,
    ClaimedTransfer,
    ScheduleClaim,
    Violation,
    score_band,
    validate_schedule,
)

DEFAULT_API_KEY_ENV = "HPC_LLM_API_KEY"
REQUIRED_PLACEHOLDERS = ("NODES", "TASKS", "OBJECTIVES", "CONSTRAINTS")

# parse outcome for one model answer
PARSE_OK = "ok"            # every task has a node and start/end
PARSE_PARTIAL = "partial"  # some rows or a makespan line were recovered
PARSE_UNPARSEABLE = "unparseable"


class TemplateError(ValueError):
    """Prompt template with missing or unknown placeholders."""


@dataclass(frozen=True)
class ModelConfig:
    endpoint: str
    model: str
    temperature: float = 0.5
    top_p: float = 0.5
    timeout_ms: int = 120_000
    response_threshold_ms: int = 30_000
    api_key_env: str = DEFAULT_API_KEY_ENV
    max_retries: int = 2

    def __post_init__(self):
        if not 0 <= self.temperature <= 1 or not 0 <= self.top_p <= 1:
            raise ValueError("temperature and top_p must lie in [0, 1]")
        if self.timeout_ms <= 0:
            raise ValueError("timeout must be positive")


def configs_from_json(text: str) -> list[ModelConfig]:
    doc = json.loads(text)
    if not isinstance(doc, list) or not doc:
        raise ValueError("config file must be a nonempty JSON array")
    return [ModelConfig(**entry) for entry in doc]


@dataclass(frozen=True)
class Transcript:
    prompt: str
    response: str
    latency_ms: int
    status: str  # "ok" | "timeout" | "connection_error" | "http_<code>" | "missing_content"


@dataclass(frozen=True)
class ParsedRow:
    task: str
    node: str
    start_ms: int | None
    end_ms: int | None
    transfer_note: str


@dataclass(frozen=True)
class ParsedSchedule:
    rows: tuple[ParsedRow, ...]
    reported_makespan_ms: int | None
    warnings: tuple[str, ...]


@dataclass(frozen=True)
class EvalRecord:
    """One model's scored result, shaped like a report row."""

    model: str
    band: Band
    adherence: str  # "adherent" | "violated" | "indeterminate"
    violations: tuple[Violation, ...]
    throughput_pct: float
    latency_ms: int | None
    latency_ok: bool | None
    reported_makespan_ms: int | None
    recomputed_makespan_ms: int | None
    parse_status: str
    transport_status: str
    warnings: tuple[str, ...] = ()
    # manual annotation slots; filled by a human reviewer, never automated
    reasoning: str | None = None
    explanation: str | None = None
    code_quality: str | None = None


# --- prompt rendering --------------------------------------------------------

def default_template() -> str:
    return (
        resources.files("hetsched")
        .joinpath("data/prompt_template.txt")
        .read_text(encoding="utf-8")
    )


def _duration_text(ms: int) -> str:
    if ms % MS_PER_HOUR == 0:
        return f"{ms // MS_PER_HOUR}h"
    hours = ms / MS_PER_HOUR
    text = f"{hours:.6f}".rstrip("0").rstrip(".")
    if parse_duration(f"{text}h") == ms:
        return f"{text}h"
    return units_str(ms)


def _rational_text(value) -> str:
    as_json = rational_json(value)
    return str(as_json)


def render_prompt(scenario: Scenario, template: str | None = None) -> str:
    """Interpolate a scenario into the prompt template.

    The template must contain each of {{NODES}}, {{TASKS}}, {{OBJECTIVES}}
    and {{CONSTRAINTS}} and nothing else in placeholder position; node and
    task lines use the same block structure for every scenario.
    """
    if template is None:
        template = default_template()
    found = set(re.findall(r"\{\{([A-Z_]+)\}\}", template))
    unknown = found - set(REQUIRED_PLACEHOLDERS)
    if unknown:
        raise TemplateError(f"unresolved placeholder {{{{{sorted(unknown)[0]}}}}}")
    missing = set(REQUIRED_PLACEHOLDERS) - found
    if missing:
        raise TemplateError(f"template missing {{{{{sorted(missing)[0]}}}}}")
    nodes_block = "\n".join(
        f"- {n.id}: {n.cpus} CPUs, {n.ram_gb} GB RAM,"
        f" Features: [{', '.join(sorted(n.features))}],"
        f" Data Transfer Rate: {_rational_text(n.data_rate_gbps)} Gbps"
        for n in scenario.nodes
    )
    tasks_block = "\n".join(
        f"- {t.id}: Needs {t.cpus} CPUs, {t.ram_gb} GB RAM,"
        f" Features: [{', '.join(sorted(t.features))}],"
        f" Duration: {_duration_text(t.duration_ms)},"
        f" Data Output: {_rational_text(t.output_gb)}GB,"
        f" Dependencies: [{', '.join(t.deps)}]"
        for t in scenario.tasks
    )
    out = template
    for name, block in (
        ("NODES", nodes_block),
        ("TASKS", tasks_block),
        ("OBJECTIVES", scenario.meta.objectives),
        ("CONSTRAINTS", scenario.meta.constraints),
    ):
        out = out.replace("{{" + name + "}}", block)
    return out


# --- transport ---------------------------------------------------------------

def query_model(config: ModelConfig, prompt: str) -> Transcript:
    """Send one chat-completion request and capture the raw answer.

    The request carries a single user message plus the configured sampling
    parameters.  Connection-level failures are retried up to max_retries;
    timeouts and HTTP error statuses are recorded and never retried, so a
    slow-but-successful call is not resent.
    """
    body = {
        "model": config.model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": config.temperature,
        "top_p": config.top_p,
    }
    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get(config.api_key_env)
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"

    attempts = config.max_retries + 1
    latency_ms = 0
    status = "connection_error"
    response_text = ""
    for attempt in range(attempts):
        started = _time.monotonic()
        try:
            resp = requests.post(
                config.endpoint,
                json=body,
                headers=headers,
                timeout=config.timeout_ms / 1000,
            )
        except requests.Timeout:
            latency_ms = int((_time.monotonic() - started) * 1000)
            status = "timeout"
            break
        except requests.ConnectionError:
            latency_ms = int((_time.monotonic() - started) * 1000)
            status = "connection_error"
            continue
        latency_ms = int((_time.monotonic() - started) * 1000)
        if resp.status_code < 200 or resp.status_code >= 300:
            status = f"http_{resp.status_code}"
            if 500 <= resp.status_code < 600 and attempt + 1 < attempts:
                continue
            break
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError):
            status = "missing_content"
            break
        if not isinstance(content, str):
            status = "missing_content"
            break
        response_text = content
        status = "ok"
        break
    return Transcript(
        prompt=prompt, response=response_text, latency_ms=latency_ms, status=status
    )


# --- answer parsing ----------------------------------------------------------

parse_time = parse_duration
format_time = units_str


def _normalize_id(text: str) -> str:
    return re.sub(r"[\s_\-*`]+", "", text).lower()


def _fuzzy_lookup(cell: str, ids: dict[str, str]) -> str | None:
    return ids.get(_normalize_id(cell))


def _pipe_cells(line: str) -> list[str]:
    return [cell.strip() for cell in line.strip().strip("|").split("|")]


def _is_separator(line: str) -> bool:
    return bool(re.fullmatch(r"\s*\|?[\s|:\-]+\|?\s*", line)) and "-" in line


def _find_pipe_tables(text: str) -> list[list[str]]:
    tables: list[list[str]] = []
    block: list[str] = []
    for line in text.splitlines():
        if line.count("|") >= 2:
            block.append(line)
        else:
            if len(block) >= 2:
                tables.append(block)
            block = []
    if len(block) >= 2:
        tables.append(block)
    return tables


def _column_roles(header_cells: list[str]) -> dict[str, int]:
    roles: dict[str, int] = {}
    for index, cell in enumerate(header_cells):
        lowered = cell.lower()
        if "task" in lowered and "role_task" not in roles:
            roles["role_task"] = index
        elif "node" in lowered and "role_node" not in roles:
            roles["role_node"] = index
        elif "start" in lowered and "role_start" not in roles:
            roles["role_start"] = index
        elif "end" in lowered and "role_end" not in roles:
            roles["role_end"] = index
        elif ("transfer" in lowered or "data" in lowered) and "role_note" not in roles:
            roles["role_note"] = index
    return roles


def _parse_cell_time(cell: str, warnings: list[str], context: str) -> int | None:
    cleaned = cell.strip().strip("*").strip()
    if not cleaned or cleaned in {"-", "—", "n/a", "N/A"}:
        return None
    try:
        return parse_duration(cleaned)
    except ValueError:
        warnings.append(f"could not read time {cell!r} in {context}")
        return None


def parse_response(raw: str, scenario: Scenario) -> ParsedSchedule:
    """Best-effort extraction of a schedule from a free-text answer.

    Looks for the densest pipe-delimited table whose header mentions tasks,
    maps rows to scenario tasks by fuzzy id match (case, spacing and
    underscores ignored), and pulls a reported makespan from the first line
    mentioning one.  Every heuristic decision lands in `warnings`; cells
    that cannot be read never turn into silent defaults.
    """
    warnings: list[str] = []
    task_ids = {_normalize_id(t.id): t.id for t in scenario.tasks}
    node_ids = {_normalize_id(n.id): n.id for n in scenario.nodes}

    candidates = []
    for table in _find_pipe_tables(raw):
        header = _pipe_cells(table[0])
        roles = _column_roles(header)
        if "role_task" in roles:
            data_lines = [l for l in table[1:] if not _is_separator(l)]
            candidates.append((len(data_lines), table, roles))
    rows: list[ParsedRow] = []
    if candidates:
        candidates.sort(key=lambda c: -c[0])
        if len(candidates) > 1:
            warnings.append(
                f"{len(candidates)} task tables found; using the largest"
            )
        _, table, roles = candidates[0]
        rows = _rows_from_table(table, roles, task_ids, node_ids, warnings)
    else:
        rows = _rows_from_aligned_columns(raw, task_ids, node_ids, warnings)
        if rows:
            warnings.append("no pipe table found; read whitespace-aligned columns")

    deduped: dict[str, ParsedRow] = {}
    for row in rows:
        if row.task in deduped:
            warnings.append(f"duplicate row for {row.task}; keeping the first")
            continue
        deduped[row.task] = row

    makespan = _reported_makespan(raw, warnings)
    return ParsedSchedule(
        rows=tuple(deduped.values()),
        reported_makespan_ms=makespan,
        warnings=tuple(warnings),
    )


def _rows_from_table(table, roles, task_ids, node_ids, warnings) -> list[ParsedRow]:
    rows = []
    for line in table[1:]:
        if _is_separator(line):
            continue
        cells = _pipe_cells(line)
        task_cell = cells[roles["role_task"]] if roles["role_task"] < len(cells) else ""
        task = _fuzzy_lookup(task_cell, task_ids)
        if task is None:
            warnings.append(f"row skipped; unknown task {task_cell!r}")
            continue
        node_cell = ""
        if "role_node" in roles and roles["role_node"] < len(cells):
            node_cell = cells[roles["role_node"]].strip("*").strip()
        node = _fuzzy_lookup(node_cell, node_ids) or node_cell
        if not node_cell:
            warnings.append(f"{task}: no node cell")
            continue
        start = end = None
        if "role_start" in roles and roles["role_start"] < len(cells):
            start = _parse_cell_time(cells[roles["role_start"]], warnings, f"{task} start")
        if "role_end" in roles and roles["role_end"] < len(cells):
            end = _parse_cell_time(cells[roles["role_end"]], warnings, f"{task} end")
        note = ""
        if "role_note" in roles and roles["role_note"] < len(cells):
            note = cells[roles["role_note"]]
        rows.append(ParsedRow(task, node, start, end, note))
    return rows


def _rows_from_aligned_columns(raw, task_ids, node_ids, warnings) -> list[ParsedRow]:
    """Fallback for answers that print space-aligned columns instead of pipes."""
    rows = []
    for line in raw.splitlines():
        cells = [c.strip() for c in re.split(r"\s{2,}|\t", line.strip()) if c.strip()]
        if len(cells) < 2:
            continue
        task = _fuzzy_lookup(cells[0], task_ids)
        if task is None:
            continue
        node = None
        for cell in cells[1:]:
            node = _fuzzy_lookup(cell, node_ids)
            if node:
                break
        if node is None:
            continue
        times = []
        for cell in cells[1:]:
            if _fuzzy_lookup(cell, node_ids):
                continue
            try:
                times.append(parse_duration(cell))
            except ValueError:
                pass
        start = times[0] if times else None
        end = times[1] if len(times) > 1 else None
        rows.append(ParsedRow(task, node, start, end, ""))
    return rows


def _reported_makespan(raw: str, warnings: list[str]) -> int | None:
    lines = [l for l in raw.splitlines() if "makespan" in l.lower()]
    lines.sort(key=lambda l: ("overall" not in l.lower()))
    for line in lines:
        value = find_duration(line)
        if value is not None:
            return value
    if lines:
        warnings.append("makespan mentioned but no readable time on the line")
    return None


def claim_from_parsed(parsed: ParsedSchedule, scenario: Scenario) -> ScheduleClaim:
    """Turn a parsed answer into a claim, lifting stated transfer times.

    A time found in a row's transfer note is attributed to that row's task;
    notes reading "no"/"none"/"-" state no transfer and carry nothing.
    """
    transfers = []
    for row in parsed.rows:
        note = row.transfer_note.strip()
        if not note or note.lower() in {"no", "none", "-", "n/a"}:
            continue
        for match in re.finditer(
            r"(\d+(?:\.\d+)?)\s*(hours?|hrs?|h|minutes?|mins?|m|seconds?|secs?|s)\b",
            note,
            re.IGNORECASE,
        ):
            try:
                stated = parse_duration(match.group(0))
            except ValueError:
                continue
            transfers.append(ClaimedTransfer(consumer=row.task, stated_ms=stated))
    return ScheduleClaim(
        rows=tuple(ClaimRow(r.task, r.node, r.start_ms, r.end_ms) for r in parsed.rows),
        transfers=tuple(transfers),
        makespan_ms=parsed.reported_makespan_ms,
    )


# --- scoring -----------------------------------------------------------------

def score_response(
    parsed: ParsedSchedule,
    scenario: Scenario,
    optimum_ms: int,
    config: ModelConfig,
    transcript: Transcript | None = None,
) -> EvalRecord:
    """Score one parsed answer into a record.

    With a complete row set (every task placed with start and end) the
    validator drives both band and adherence and the recomputed makespan
    wins over the reported one; otherwise the reported makespan alone sets
    the band and adherence is indeterminate.
    """
    total = len(scenario.tasks)
    placed = len(parsed.rows)
    complete = placed == total and all(
        r.start_ms is not None and r.end_ms is not None for r in parsed.rows
    )
    warnings = list(parsed.warnings)
    violations: tuple[Violation, ...] = ()
    recomputed = None
    if complete:
        report = validate_schedule(claim_from_parsed(parsed, scenario), scenario)
        recomputed = report.recomputed_makespan_ms
        adherence = "adherent" if report.adherent else "violated"
        violations = report.violations
        # recomputed wins; claims invalidated by unknown ids fall back to
        # whatever makespan the answer reported
        band = score_band(
            recomputed if recomputed is not None else parsed.reported_makespan_ms,
            optimum_ms,
            report,
        )
        reported = parsed.reported_makespan_ms
        if (
            reported is not None
            and recomputed is not None
            and abs(reported - recomputed) > 1_000
        ):
            warnings.append(
                f"reported makespan {units_str(reported)} disagrees with"
                f" recomputed {units_str(recomputed)}; recomputed wins"
            )
    else:
        adherence = "indeterminate"
        band = score_band(parsed.reported_makespan_ms, optimum_ms)
    if complete:
        parse_status = PARSE_OK
    elif placed or parsed.reported_makespan_ms is not None:
        parse_status = PARSE_PARTIAL
    else:
        parse_status = PARSE_UNPARSEABLE
    latency_ms = transcript.latency_ms if transcript else None
    transport = transcript.status if transcript else "ok"
    latency_ok = None
    if transcript is not None:
        latency_ok = transcript.status == "ok" and latency_ms <= config.response_threshold_ms
    return EvalRecord(
        model=config.model,
        band=band,
        adherence=adherence,
        violations=violations,
        throughput_pct=100.0 * placed / total,
        latency_ms=latency_ms,
        latency_ok=latency_ok,
        reported_makespan_ms=parsed.reported_makespan_ms,
        recomputed_makespan_ms=recomputed,
        parse_status=parse_status,
        transport_status=transport,
        warnings=tuple(warnings),
    )


# --- run orchestration -------------------------------------------------------

def _safe_filename(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name) or "model"


def run_eval(
    scenario: Scenario,
    configs: list[ModelConfig],
    out_dir: str | Path,
    template: str | None = None,
    max_in_flight: int = 4,
) -> list[EvalRecord]:
    """Render, query, parse, and score every configured model.

    Queries run concurrently up to `max_in_flight`; each model is asked
    exactly once.  Transport failures degrade to records with a failure
    status rather than aborting the run.  Transcripts, the full record
    dump, and reports in all three formats are written under `out_dir`.
    """
    if not configs:
        raise ValueError("no model configs given")
    out = Path(out_dir)
    (out / "transcripts").mkdir(parents=True, exist_ok=True)
    prompt = render_prompt(scenario, template)
    optimum = solve_exact(scenario, SimMode.CAPACITY_AWARE).makespan_ms

    def one(config: ModelConfig) -> tuple[ModelConfig, Transcript]:
        return config, query_model(config, prompt)

    with ThreadPoolExecutor(max_workers=min(max_in_flight, len(configs))) as pool:
        outcomes = list(pool.map(one, configs))

    records = []
    used_names: set[str] = set()
    for config, transcript in sorted(outcomes, key=lambda pair: pair[0].model):
        parsed = parse_response(transcript.response, scenario)
        record = score_response(parsed, scenario, optimum, config, transcript)
        records.append(record)
        stem = _safe_filename(config.model)
        while stem in used_names:
            stem += "_2"
        used_names.add(stem)
        transcript_text = (
            f"model: {config.model}\nstatus: {transcript.status}\n"
            f"latency_ms: {transcript.latency_ms}\n"
            f"--- prompt ---\n{transcript.prompt}\n"
            f"--- response ---\n{transcript.response}\n"
        )
        (out / "transcripts" / f"{stem}.txt").write_text(transcript_text, encoding="utf-8")

    (out / "records.json").write_text(records_to_json(records), encoding="utf-8")
    for fmt in ("csv", "json", "txt"):
        (out / f"report.{fmt}").write_text(write_report(records, fmt), encoding="utf-8")
    return records


# --- reporting ---------------------------------------------------------------

REPORT_COLUMNS = (
    "Model",
    "Makespan",
    "Band",
    "Throughput",
    "Constraint Adherence",
    "Parse Status",
    "Latency",
    "Reasoning",
    "Explanation",
    "Code",
)

_FLAG = {True: "+", False: "-", None: "0"}
_ADHERENCE_FLAG = {"adherent": "+", "violated": "-", "indeterminate": "0"}


def _report_row(record: EvalRecord) -> dict[str, str]:
    makespan = record.recomputed_makespan_ms
    if makespan is None:
        makespan = record.reported_makespan_ms
    return {
        "Model": record.model,
        "Makespan": units_str(makespan) if makespan is not None else "",
        "Band": record.band.value,
        "Throughput": f"{record.throughput_pct:g}%",
        "Constraint Adherence": _ADHERENCE_FLAG[record.adherence],
        "Parse Status": record.parse_status,
        "Latency": _FLAG[record.latency_ok],
        "Reasoning": record.reasoning or "",
        "Explanation": record.explanation or "",
        "Code": record.code_quality or "",
    }


def write_report(records: list[EvalRecord], fmt: str) -> str:
    """Render records as csv, json, or a plain-text table.

    The three formats carry identical field values; identical records
    always produce byte-identical artifacts.
    """
    if not records:
        raise ValueError("no records to report")
    rows = [_report_row(r) for r in records]
    if fmt == "csv":
        import csv
        import io

        out = io.StringIO()
        writer = csv.DictWriter(out, fieldnames=REPORT_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        return out.getvalue()
    if fmt == "json":
        return json.dumps(rows, indent=2) + "\n"
    if fmt == "txt":
        widths = {
            col: max(len(col), *(len(row[col]) for row in rows)) for col in REPORT_COLUMNS
        }
        lines = [
            "  ".join(col.ljust(widths[col]) for col in REPORT_COLUMNS).rstrip(),
            "  ".join("-" * widths[col] for col in REPORT_COLUMNS).rstrip(),
        ]
        for row in rows:
            lines.append(
                "  ".join(row[col].ljust(widths[col]) for col in REPORT_COLUMNS).rstrip()
            )
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def records_to_json(records: list[EvalRecord]) -> str:
    """Full-fidelity record dump (input to the `report` subcommand)."""
    out = []
    for r in records:
        out.append(
            {
                "model": r.model,
                "band": r.band.value,
                "adherence": r.adherence,
                "violations": [
                    {"kind": v.kind.value, "subjects": list(v.subjects), "detail": v.detail}
                    for v in r.violations
                ],
                "throughput_pct": r.throughput_pct,
                "latency_ms": r.latency_ms,
                "latency_ok": r.latency_ok,
                "reported_makespan_ms": r.reported_makespan_ms,
                "recomputed_makespan_ms": r.recomputed_makespan_ms,
                "parse_status": r.parse_status,
                "transport_status": r.transport_status,
                "warnings": list(r.warnings),
                "reasoning": r.reasoning,
                "explanation": r.explanation,
                "code_quality": r.code_quality,
            }
        )
    return json.dumps(out, indent=2) + "\n"


def records_from_json(text: str) -> list[EvalRecord]:
    from .validator import ViolationKind

    doc = json.loads(text)
    records = []
    for entry in doc:
        records.append(
            EvalRecord(
                model=entry["model"],
                band=Band(entry["band"]),
                adherence=entry["adherence"],
                violations=tuple(
                    Violation(
                        ViolationKind(v["kind"]), tuple(v["subjects"]), v["detail"]
                    )
                    for v in entry.get("violations", [])
                ),
                throughput_pct=entry["throughput_pct"],
                latency_ms=entry.get("latency_ms"),
                latency_ok=entry.get("latency_ok"),
                reported_makespan_ms=entry.get("reported_makespan_ms"),
                recomputed_makespan_ms=entry.get("recomputed_makespan_ms"),
                parse_status=entry["parse_status"],
                transport_status=entry.get("transport_status", "ok"),
                warnings=tuple(entry.get("warnings", [])),
                reasoning=entry.get("reasoning"),
                explanation=entry.get("explanation"),
                code_quality=entry.get("code_quality"),
            )
        )
    return records
