"""Constraint checking, violation taxonomy, metrics, and makespan bands.

Any schedule, whether solver-produced or claimed by a model answer, can be
checked against the five placement constraints: single assignment, node
capacity (per task and concurrently), feature availability, dependency and
data-arrival order, and stated transfer arithmetic.  Violations are data,
not exceptions; `adherent` is true exactly when the list is empty.

Violation kinds are stable string identifiers:

    UnassignedTask, MultipleAssignment, UnknownNodeOrTask,
    PerTaskDemandExceedsNode, NodeCapacityExceeded, MissingFeature,
    PrematureStart, DurationMismatch, TransferArithmeticMismatch
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass
from enum import Enum

from .scenario import Scenario
from .semantics import Schedule, transfer_ms
from .timefmt import clock_str, parse_duration

ARRIVAL_TOLERANCE_MS = 1_000  # forgive whole-second rounding in claims
TRANSFER_TOLERANCE_MS = 1_000
DEFAULT_BAND_TOLERANCE_MS = 120_000


def _time_text(ms: int) -> str:
    return clock_str(ms) if ms >= 0 else f"{ms} ms"


class ViolationKind(str, Enum):
    UNASSIGNED_TASK = "UnassignedTask"
    MULTIPLE_ASSIGNMENT = "MultipleAssignment"
    UNKNOWN_NODE_OR_TASK = "UnknownNodeOrTask"
    PER_TASK_DEMAND_EXCEEDS_NODE = "PerTaskDemandExceedsNode"
    NODE_CAPACITY_EXCEEDED = "NodeCapacityExceeded"
    MISSING_FEATURE = "MissingFeature"
    PREMATURE_START = "PrematureStart"
    DURATION_MISMATCH = "DurationMismatch"
    TRANSFER_ARITHMETIC_MISMATCH = "TransferArithmeticMismatch"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    subjects: tuple[str, ...]
    detail: str


@dataclass(frozen=True)
class ClaimRow:
    """One claimed placement; times may be missing in model answers."""

    task: str
    node: str
    start_ms: int | None = None
    end_ms: int | None = None


@dataclass(frozen=True)
class ClaimedTransfer:
    """A transfer time stated in a claim.

    `producer` is None when the statement could not be attributed to a
    specific dependency edge; such values are checked against every
    incoming edge of the consumer.
    """

    consumer: str
    stated_ms: int
    producer: str | None = None


@dataclass(frozen=True)
class ScheduleClaim:
    rows: tuple[ClaimRow, ...]
    transfers: tuple[ClaimedTransfer, ...] = ()
    makespan_ms: int | None = None


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]
    adherent: bool
    recomputed_makespan_ms: int | None
    notes: tuple[str, ...] = ()

    def kinds(self) -> set[ViolationKind]:
        return {v.kind for v in self.violations}

    def to_json_obj(self) -> dict:
        return {
            "adherent": self.adherent,
            "recomputed_makespan_ms": self.recomputed_makespan_ms,
            "violations": [
                {"kind": v.kind.value, "subjects": list(v.subjects), "detail": v.detail}
                for v in self.violations
            ],
            "notes": list(self.notes),
        }


def claim_from_schedule(schedule: Schedule) -> ScheduleClaim:
    """View a solver schedule as a claim (its transfers become stated times)."""
    return ScheduleClaim(
        rows=tuple(
            ClaimRow(p.task, p.node, p.start_ms, p.end_ms) for p in schedule.placements
        ),
        transfers=tuple(
            ClaimedTransfer(t.consumer, t.duration_ms, producer=t.producer)
            for t in schedule.transfers
        ),
        makespan_ms=schedule.makespan_ms,
    )


def _claim_time(entry: dict, key: str) -> int | None:
    value = entry.get(f"{key}_ms")
    if value is not None:
        return int(value)
    text = entry.get(key)
    if isinstance(text, str):
        return parse_duration(text)
    return None


def claim_from_json(text: str) -> ScheduleClaim:
    """Parse a schedule/claim JSON file (the schedule serialization schema).

    Times may be given as `start_ms`/`end_ms` integers or as clock strings
    under `start`/`end`.
    """
    doc = json.loads(text)
    if not isinstance(doc, dict) or not isinstance(doc.get("placements"), list):
        raise ValueError("claim file needs a top-level 'placements' array")
    rows = []
    for entry in doc["placements"]:
        rows.append(
            ClaimRow(
                task=str(entry["task"]),
                node=str(entry["node"]),
                start_ms=_claim_time(entry, "start"),
                end_ms=_claim_time(entry, "end"),
            )
        )
    transfers = []
    for entry in doc.get("transfers", []):
        stated = entry.get("stated_ms")
        if stated is None and {"arrive_ms", "depart_ms"} <= set(entry):
            stated = entry["arrive_ms"] - entry["depart_ms"]
        if stated is None:
            continue
        transfers.append(
            ClaimedTransfer(
                consumer=str(entry["consumer"]),
                stated_ms=int(stated),
                producer=entry.get("producer"),
            )
        )
    return ScheduleClaim(
        rows=tuple(rows),
        transfers=tuple(transfers),
        makespan_ms=doc.get("makespan_ms"),
    )


def validate_schedule(
    claim: Schedule | ScheduleClaim,
    scenario: Scenario,
    arrival_tolerance_ms: int = ARRIVAL_TOLERANCE_MS,
    transfer_tolerance_ms: int = TRANSFER_TOLERANCE_MS,
) -> ValidationReport:
    """Check a schedule or claim against all placement constraints.

    Unknown ids become UnknownNodeOrTask violations rather than exceptions.
    Rows whose task fails the per-task fit check are excluded from the
    concurrent capacity profile (the per-task violation subsumes them), and
    arrival checks skip dependencies whose end time is unknown.  Placing a
    task on a multi-feature node it does not need is recorded as an
    advisory note, never a violation.
    """
    if isinstance(claim, Schedule):
        claim = claim_from_schedule(claim)
    violations: list[Violation] = []
    notes: list[str] = []

    known_rows: list[ClaimRow] = []
    rows_by_task: dict[str, list[ClaimRow]] = {}
    for row in claim.rows:
        if not scenario.has_task(row.task):
            violations.append(
                Violation(
                    ViolationKind.UNKNOWN_NODE_OR_TASK,
                    (row.task,),
                    f"claim references unknown task {row.task}",
                )
            )
            continue
        if not scenario.has_node(row.node):
            violations.append(
                Violation(
                    ViolationKind.UNKNOWN_NODE_OR_TASK,
                    (row.task, row.node),
                    f"claim places {row.task} on unknown node {row.node}",
                )
            )
            continue
        known_rows.append(row)
        rows_by_task.setdefault(row.task, []).append(row)

    # constraint 1: exactly one node per task
    for task in scenario.tasks:
        rows = rows_by_task.get(task.id, [])
        if not rows:
            violations.append(
                Violation(
                    ViolationKind.UNASSIGNED_TASK,
                    (task.id,),
                    f"{task.id} has no placement",
                )
            )
        elif len(rows) > 1:
            nodes = ", ".join(r.node for r in rows)
            violations.append(
                Violation(
                    ViolationKind.MULTIPLE_ASSIGNMENT,
                    (task.id,),
                    f"{task.id} placed {len(rows)} times (on {nodes})",
                )
            )

    # constraints 2 (per-task fit) and 3 (features), plus the advisory note
    misfit_rows: set[int] = set()
    for row in known_rows:
        task = scenario.task(row.task)
        node = scenario.node(row.node)
        if task.cpus > node.cpus or task.ram_gb > node.ram_gb:
            misfit_rows.add(id(row))
            violations.append(
                Violation(
                    ViolationKind.PER_TASK_DEMAND_EXCEEDS_NODE,
                    (row.task, row.node),
                    f"{row.task} needs {task.cpus} cpus / {task.ram_gb} GB;"
                    f" {node.id} has {node.cpus} cpus / {node.ram_gb} GB",
                )
            )
        missing = task.features - node.features
        if missing:
            violations.append(
                Violation(
                    ViolationKind.MISSING_FEATURE,
                    (row.task, row.node),
                    f"{node.id} lacks feature(s) {', '.join(sorted(missing))}"
                    f" required by {row.task}",
                )
            )
        unused = node.features - task.features - {"CPU"}
        if unused:
            notes.append(
                f"{row.task} occupies multi-feature node {node.id}"
                f" without using {', '.join(sorted(unused))}"
            )

    # duration consistency
    for row in known_rows:
        if row.start_ms is None or row.end_ms is None:
            continue
        expected = scenario.task(row.task).duration_ms
        actual = row.end_ms - row.start_ms
        if actual != expected:
            violations.append(
                Violation(
                    ViolationKind.DURATION_MISMATCH,
                    (row.task,),
                    f"{row.task} spans {actual} ms"
                    f" but its duration is {expected} ms ({clock_str(expected)})",
                )
            )

    # constraint 4: starts must wait for recomputed data arrival
    for row in known_rows:
        if row.start_ms is None:
            continue
        task = scenario.task(row.task)
        dst_rate = scenario.node(row.node).data_rate_gbps
        required = 0
        incomplete = False
        for dep_id in task.deps:
            dep_rows = [
                r for r in rows_by_task.get(dep_id, []) if r.end_ms is not None
            ]
            if not dep_rows:
                incomplete = True
                continue
            # with duplicated dependency rows, take the latest arrival
            arrival = max(
                r.end_ms
                + transfer_ms(
                    scenario.task(dep_id).output_gb,
                    scenario.node(r.node).data_rate_gbps,
                    dst_rate,
                    same_node=r.node == row.node,
                )
                for r in dep_rows
            )
            required = max(required, arrival)
        if not incomplete and row.start_ms + arrival_tolerance_ms < required:
            violations.append(
                Violation(
                    ViolationKind.PREMATURE_START,
                    (row.task,),
                    f"{row.task} starts at {_time_text(row.start_ms)} but its"
                    f" inputs arrive at {_time_text(required)}",
                )
            )

    # constraint 2, concurrent form: capacity profile per node
    violations.extend(_capacity_profile_violations(known_rows, misfit_rows, scenario))

    # constraint 5: stated transfer arithmetic
    violations.extend(
        _transfer_violations(claim.transfers, rows_by_task, scenario, transfer_tolerance_ms)
    )

    all_placed = all(task.id in rows_by_task for task in scenario.tasks)
    all_ended = all(
        any(r.end_ms is not None for r in rows_by_task[task.id])
        for task in scenario.tasks
        if task.id in rows_by_task
    )
    recomputed = None
    if all_placed and all_ended:
        recomputed = max(
            max(r.end_ms for r in rows if r.end_ms is not None)
            for rows in rows_by_task.values()
        )
    return ValidationReport(
        violations=tuple(violations),
        adherent=not violations,
        recomputed_makespan_ms=recomputed,
        notes=tuple(notes),
    )


def _capacity_profile_violations(
    rows: list[ClaimRow], misfit_rows: set[int], scenario: Scenario
) -> list[Violation]:
    violations = []
    for node in scenario.nodes:
        active = [
            (r.start_ms, r.end_ms, scenario.task(r.task).cpus, scenario.task(r.task).ram_gb)
            for r in rows
            if r.node == node.id
            and r.start_ms is not None
            and r.end_ms is not None
            and id(r) not in misfit_rows
        ]
        worst = None  # (instant, cpu, ram)
        for point in sorted({s for s, _, _, _ in active}):
            cpu = sum(c for s, e, c, _ in active if s <= point < e)
            ram = sum(g for s, e, _, g in active if s <= point < e)
            if cpu > node.cpus or ram > node.ram_gb:
                worst = (point, cpu, ram)
                break
        if worst:
            instant, cpu, ram = worst
            violations.append(
                Violation(
                    ViolationKind.NODE_CAPACITY_EXCEEDED,
                    (node.id,),
                    f"{node.id} over-allocated at {_time_text(instant)}:"
                    f" {cpu}/{node.cpus} cpus, {ram}/{node.ram_gb} GB",
                )
            )
    return violations


def _transfer_violations(
    stated: tuple[ClaimedTransfer, ...],
    rows_by_task: dict[str, list[ClaimRow]],
    scenario: Scenario,
    tolerance_ms: int,
) -> list[Violation]:
    violations = []
    for claim in stated:
        if not scenario.has_task(claim.consumer):
            continue  # already reported as UnknownNodeOrTask
        consumer_rows = rows_by_task.get(claim.consumer, [])
        if not consumer_rows:
            continue
        consumer_node = consumer_rows[0].node
        deps = scenario.task(claim.consumer).deps
        if claim.producer is not None and claim.producer not in deps:
            violations.append(
                Violation(
                    ViolationKind.TRANSFER_ARITHMETIC_MISMATCH,
                    (claim.consumer,),
                    f"claimed transfer into {claim.consumer} from {claim.producer},"
                    f" which is not a dependency",
                )
            )
            continue
        candidates = {}
        for dep_id in deps if claim.producer is None else (claim.producer,):
            dep_rows = rows_by_task.get(dep_id, [])
            if not dep_rows:
                continue
            candidates[dep_id] = transfer_ms(
                scenario.task(dep_id).output_gb,
                scenario.node(dep_rows[0].node).data_rate_gbps,
                scenario.node(consumer_node).data_rate_gbps,
                same_node=dep_rows[0].node == consumer_node,
            )
        if not candidates:
            if claim.stated_ms > tolerance_ms:
                violations.append(
                    Violation(
                        ViolationKind.TRANSFER_ARITHMETIC_MISMATCH,
                        (claim.consumer,),
                        f"{claim.consumer} claims a {clock_str(claim.stated_ms)}"
                        f" transfer but has no placed dependencies",
                    )
                )
            continue
        best_dep, best = min(
            candidates.items(), key=lambda kv: abs(kv[1] - claim.stated_ms)
        )
        if abs(best - claim.stated_ms) > tolerance_ms:
            violations.append(
                Violation(
                    ViolationKind.TRANSFER_ARITHMETIC_MISMATCH,
                    (claim.consumer,),
                    f"claimed transfer of {clock_str(claim.stated_ms)} into"
                    f" {claim.consumer}; recomputed {best_dep} edge takes {clock_str(best)}",
                )
            )
    return violations


@dataclass(frozen=True)
class Metrics:
    """Throughput, per-node utilization, and load balance for a schedule."""

    throughput_pct: float
    node_utilization: dict[str, float]  # used nodes only
    balance_cov: float
    makespan_ms: int


def compute_metrics(schedule: Schedule, scenario: Scenario) -> Metrics:
    """Utilization = cpu-ms placed on a node over its cpu-ms budget.

    Nodes without tasks are excluded both from the utilization map and the
    coefficient of variation.
    """
    tasks = {task.id for task in scenario.tasks}
    placed = {p.task for p in schedule.placements}
    missing = tasks - placed
    if missing:
        raise ValueError(f"unplaced task(s): {', '.join(sorted(missing))}")
    makespan = schedule.makespan_ms
    cpu_ms: dict[str, int] = {}
    for placement in schedule.placements:
        task = scenario.task(placement.task)
        cpu_ms[placement.node] = cpu_ms.get(placement.node, 0) + task.cpus * (
            placement.end_ms - placement.start_ms
        )
    utilization = {
        node_id: used / (scenario.node(node_id).cpus * makespan)
        for node_id, used in sorted(cpu_ms.items())
    }
    values = list(utilization.values())
    if len(values) > 1 and statistics.fmean(values) > 0:
        cov = statistics.pstdev(values) / statistics.fmean(values)
    else:
        cov = 0.0
    return Metrics(
        throughput_pct=100.0 * len(placed) / len(tasks),
        node_utilization=utilization,
        balance_cov=cov,
        makespan_ms=makespan,
    )


class Band(str, Enum):
    OPTIMAL = "Optimal"
    NEAR_OPTIMAL = "NearOptimal"
    SUBOPTIMAL = "Suboptimal"
    BELOW_OPTIMUM = "BelowOptimum"
    INVALID = "Invalid"


def score_band(
    makespan_ms: int | None,
    optimum_ms: int,
    report: ValidationReport | None = None,
    tolerance_ms: int = DEFAULT_BAND_TOLERANCE_MS,
) -> Band:
    """Categorical accuracy of a claimed or recomputed makespan.

    Below the analytical optimum is an impossible claim and gets its own
    band; the band is independent of constraint adherence.  When no
    makespan is given, the report's recomputed value (if any) is used;
    otherwise the result is Invalid.
    """
    if optimum_ms <= 0:
        raise ValueError("optimum must be positive")
    if makespan_ms is None and report is not None:
        makespan_ms = report.recomputed_makespan_ms
    if makespan_ms is None:
        return Band.INVALID
    if makespan_ms < optimum_ms:
        return Band.BELOW_OPTIMUM
    if makespan_ms == optimum_ms:
        return Band.OPTIMAL
    if makespan_ms <= optimum_ms + tolerance_ms:
        return Band.NEAR_OPTIMAL
    return Band.SUBOPTIMAL
