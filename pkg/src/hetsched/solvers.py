"""Schedule producers: exhaustive feature-feasible enumeration and HEFT.

The exact solver enumerates the cartesian product of each task's feasible
nodes, simulates every assignment, and keeps the minimum-makespan row; a
configurable row bound guards against combinatorial blowup.  The heuristic
is the classic upward-rank HEFT list scheduler with insertion-based
earliest-finish placement, restricted to feature-feasible nodes.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass

from .scenario import Scenario, TaskSpec, node_can_run, topological_order
from .semantics import (
    Placement,
    Schedule,
    ScheduleError,
    SimMode,
    data_ready_ms,
    earliest_start_ms,
    simulate,
    transfer_ms,
    transfers_for,
)
from .timefmt import clock_str, seconds_str

DEFAULT_ROW_LIMIT = 1_000_000


class EnumerationLimitError(RuntimeError):
    """The instance has more assignment rows than the configured bound."""


@dataclass(frozen=True)
class EnumRow:
    """One enumerated assignment with its per-edge transfers and makespan."""

    assignment: tuple[tuple[str, str], ...]  # (task, node), sorted by task
    transfers_ms: tuple[tuple[str, str, int], ...]  # (producer, consumer, ms)
    final_start_ms: int  # start of the latest-ending task
    makespan_ms: int
    capacity_feasible: bool  # relaxed timing equals capacity-aware timing

    def assignment_dict(self) -> dict[str, str]:
        return dict(self.assignment)


def feasible_nodes(task: TaskSpec, scenario: Scenario) -> set[str]:
    """Ids of nodes offering the task's features and fitting its demand."""
    return {node.id for node in scenario.nodes if node_can_run(node, task)}


def enumerate_table(
    scenario: Scenario,
    mode: SimMode,
    row_limit: int = DEFAULT_ROW_LIMIT,
) -> list[EnumRow]:
    """Simulate every feature-feasible assignment.

    Returns one row per element of the cartesian product of feasible nodes
    over all tasks, sorted by (makespan, assignment).  Refuses instances
    whose product exceeds `row_limit`.
    """
    task_ids = sorted(task.id for task in scenario.tasks)
    choices = []
    total = 1
    for task_id in task_ids:
        nodes = sorted(feasible_nodes(scenario.task(task_id), scenario))
        if not nodes:
            raise ScheduleError(f"no feasible node for task {task_id}")
        choices.append(nodes)
        total *= len(nodes)
        if total > row_limit:
            raise EnumerationLimitError(
                f"{total}+ assignment rows exceed the bound of {row_limit}"
            )
    rows = []
    for combo in itertools.product(*choices):
        assignment = dict(zip(task_ids, combo))
        rows.append(_row_for(assignment, scenario, mode))
    rows.sort(key=lambda r: (r.makespan_ms, r.assignment))
    return rows


def _row_for(assignment: dict[str, str], scenario: Scenario, mode: SimMode) -> EnumRow:
    schedule = simulate(assignment, scenario, mode)
    other = simulate(
        assignment,
        scenario,
        SimMode.CAPACITY_AWARE if mode is SimMode.CAPACITY_RELAXED else SimMode.CAPACITY_RELAXED,
    )
    last = max(schedule.placements, key=lambda p: (p.end_ms, p.task))
    return EnumRow(
        assignment=tuple(sorted(assignment.items())),
        transfers_ms=tuple(
            (t.producer, t.consumer, t.duration_ms) for t in schedule.transfers
        ),
        final_start_ms=last.start_ms,
        makespan_ms=schedule.makespan_ms,
        capacity_feasible=schedule.placements == other.placements,
    )


def enumeration_csv(rows: list[EnumRow], scenario: Scenario) -> str:
    """Render enumeration rows as CSV, one transfer column per edge."""
    edges = scenario.edges()
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(
        ["assignment"]
        + [f"transfer {p}->{c} (s)" for p, c in edges]
        + ["final_start (h:m:s)", "makespan (h:m:s)", "capacity_feasible"]
    )
    for row in rows:
        transfer_by_edge = {(p, c): ms for p, c, ms in row.transfers_ms}
        writer.writerow(
            [", ".join(f"{t}->{n}" for t, n in row.assignment)]
            + [seconds_str(transfer_by_edge[edge]) for edge in edges]
            + [
                clock_str(row.final_start_ms),
                clock_str(row.makespan_ms),
                "yes" if row.capacity_feasible else "no",
            ]
        )
    return out.getvalue()


def solve_exact(
    scenario: Scenario,
    mode: SimMode = SimMode.CAPACITY_AWARE,
    row_limit: int = DEFAULT_ROW_LIMIT,
) -> Schedule:
    """Minimum-makespan schedule over all feasible assignments.

    Ties break on the lexicographically smallest assignment, so the result
    is deterministic.
    """
    rows = enumerate_table(scenario, mode, row_limit)
    return simulate(rows[0].assignment_dict(), scenario, mode)


def heft_rank(
    scenario: Scenario, include_local_pairs: bool = False
) -> dict[str, float]:
    """Upward ranks in milliseconds.

    rank(t) = duration(t) + max over successors s of (avg_comm(t) + rank(s)),
    where avg_comm(t) averages the transfer time of t's output over ordered
    node pairs.  Same-node (zero-cost) pairs are excluded by default, the
    usual convention; pass include_local_pairs=True to average them in.
    """
    successors: dict[str, list[str]] = {task.id: [] for task in scenario.tasks}
    for producer, consumer in scenario.edges():
        successors[producer].append(consumer)
    rates = [node.data_rate_gbps for node in scenario.nodes]
    pairs = [
        (a, b, i == j)
        for i, a in enumerate(rates)
        for j, b in enumerate(rates)
        if include_local_pairs or i != j
    ]
    ranks: dict[str, float] = {}
    for task_id in reversed(topological_order(scenario)):
        task = scenario.task(task_id)
        if pairs:
            comm_values = [
                transfer_ms(task.output_gb, a, b, same_node=same)
                for a, b, same in pairs
            ]
            avg_comm = sum(comm_values) / len(comm_values)
        else:
            avg_comm = 0.0
        downstream = [avg_comm + ranks[s] for s in successors[task_id]]
        ranks[task_id] = task.duration_ms + (max(downstream) if downstream else 0.0)
    return ranks


def solve_heft(scenario: Scenario, include_local_pairs: bool = False) -> Schedule:
    """HEFT list schedule: decreasing upward rank, earliest-finish placement.

    Each task goes to the feature-feasible node minimizing its finish time
    under capacity-aware timing with insertion; rank and finish ties break
    lexicographically.  Every dependency outranks its consumers, so data
    arrival times are always defined when a task is placed.
    """
    ranks = heft_rank(scenario, include_local_pairs)
    order = sorted(ranks, key=lambda tid: (-ranks[tid], tid))
    placed: dict[str, Placement] = {}
    by_node: dict[str, list[Placement]] = {node.id: [] for node in scenario.nodes}
    for task_id in order:
        task = scenario.task(task_id)
        candidates = sorted(feasible_nodes(task, scenario))
        if not candidates:
            raise ScheduleError(f"no feasible node for task {task_id}")
        best: tuple[int, str] | None = None
        best_start = 0
        for node_id in candidates:
            node = scenario.node(node_id)
            ready = data_ready_ms(task, {task_id: node_id}, placed, scenario)
            start = earliest_start_ms(
                node, task.cpus, task.ram_gb, task.duration_ms, ready,
                by_node[node_id], scenario, SimMode.CAPACITY_AWARE,
            )
            finish = start + task.duration_ms
            if best is None or (finish, node_id) < best:
                best = (finish, node_id)
                best_start = start
        finish, node_id = best
        placement = Placement(task_id, node_id, best_start, finish)
        placed[task_id] = placement
        by_node[node_id].append(placement)
    placements = tuple(sorted(placed.values(), key=lambda p: p.task))
    return Schedule(
        placements=placements,
        transfers=transfers_for(placed, scenario),
        makespan_ms=max(p.end_ms for p in placements),
        mode=SimMode.CAPACITY_AWARE,
    )
