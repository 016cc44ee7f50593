"""Ground-truth timing model for a fixed task-to-node assignment.

Transfer delays follow the bit-volume rule: moving S gigabytes between two
nodes takes S * 8 / min(src_rate, dst_rate) seconds, rounded up to the next
millisecond; co-located producer and consumer pay nothing.  A task may not
start before every dependency's output has arrived at its node.

Two simulation modes are exposed:

* CAPACITY_RELAXED enforces only dependency and transfer timing.
* CAPACITY_AWARE additionally keeps the summed cpu and ram demand of
  concurrently running tasks within each node's limits, delaying starts
  into the first gap that fits.

Both are pure functions over immutable inputs; identical inputs produce
bit-identical schedules.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Mapping, Sequence

from .scenario import Scenario, TaskSpec, NodeSpec, rational_json, topological_order
from .timefmt import clock_str

Assignment = Mapping[str, str]


class ScheduleError(ValueError):
    """Invalid assignment or timing query."""


class SimMode(Enum):
    CAPACITY_AWARE = "aware"
    CAPACITY_RELAXED = "relaxed"


@dataclass(frozen=True)
class Placement:
    """One task pinned to a node with concrete start/end times (ms)."""

    task: str
    node: str
    start_ms: int
    end_ms: int


@dataclass(frozen=True)
class TransferRecord:
    """Data movement for one dependency edge; zero length when co-located."""

    producer: str
    consumer: str
    src: str
    dst: str
    size_gb: Fraction
    depart_ms: int
    arrive_ms: int

    @property
    def duration_ms(self) -> int:
        return self.arrive_ms - self.depart_ms


@dataclass(frozen=True)
class Schedule:
    """Placements for every task plus per-edge transfers and the makespan."""

    placements: tuple[Placement, ...]
    transfers: tuple[TransferRecord, ...]
    makespan_ms: int
    mode: SimMode

    def placement(self, task_id: str) -> Placement:
        for p in self.placements:
            if p.task == task_id:
                return p
        raise KeyError(task_id)

    def assignment(self) -> dict[str, str]:
        return {p.task: p.node for p in self.placements}


def transfer_ms(
    size_gb: Fraction | int,
    src_rate_gbps: Fraction | int,
    dst_rate_gbps: Fraction | int,
    same_node: bool = False,
) -> int:
    """Transfer delay in milliseconds for one dependency edge.

    seconds = GB * 8 / min(src, dst) Gbit/s, rounded up to whole ms.
    """
    if src_rate_gbps <= 0 or dst_rate_gbps <= 0:
        raise ScheduleError("non-positive data rate")
    size = Fraction(size_gb)
    if size < 0:
        raise ScheduleError("negative transfer size")
    if same_node or size == 0:
        return 0
    seconds = size * 8 / min(Fraction(src_rate_gbps), Fraction(dst_rate_gbps))
    return math.ceil(seconds * 1000)


def data_ready_ms(
    task: TaskSpec,
    assignment: Assignment,
    placed: Mapping[str, Placement],
    scenario: Scenario,
) -> int:
    """Earliest instant all dependency outputs have arrived at the task's node.

    Each dependency's output departs when the dependency ends and travels at
    the slower of the two link rates; a task with no dependencies is ready
    at time zero.
    """
    node_id = assignment[task.id]
    dst_rate = scenario.node(node_id).data_rate_gbps
    ready = 0
    for dep_id in task.deps:
        dep_placement = placed.get(dep_id)
        if dep_placement is None:
            raise ScheduleError(f"dependency {dep_id} of {task.id} not placed")
        dep_task = scenario.task(dep_id)
        delay = transfer_ms(
            dep_task.output_gb,
            scenario.node(dep_placement.node).data_rate_gbps,
            dst_rate,
            same_node=dep_placement.node == node_id,
        )
        ready = max(ready, dep_placement.end_ms + delay)
    return ready


def earliest_start_ms(
    node: NodeSpec,
    cpus: int,
    ram_gb: int,
    duration_ms: int,
    ready_ms: int,
    existing: Sequence[Placement],
    scenario: Scenario,
    mode: SimMode,
) -> int:
    """First instant at or after ready_ms where the demand fits on the node.

    Relaxed mode ignores occupancy.  Aware mode scans candidate instants,
    the ready time and each already-placed finish after it, and returns the
    first one where summed cpu and ram demand stays within the node limits
    over the whole run.  Usage only falls at a finish, so the earliest
    feasible start is always one of these candidates; placing into a gap
    between existing runs (insertion) falls out naturally.
    """
    if cpus > node.cpus or ram_gb > node.ram_gb:
        raise ScheduleError(
            f"demand {cpus} cpus / {ram_gb} GB exceeds node {node.id}"
            f" ({node.cpus} cpus / {node.ram_gb} GB)"
        )
    if mode is SimMode.CAPACITY_RELAXED:
        return ready_ms
    rows = [
        (
            p.start_ms,
            p.end_ms,
            scenario.task(p.task).cpus,
            scenario.task(p.task).ram_gb,
        )
        for p in existing
        if p.node == node.id
    ]
    if not rows:
        return ready_ms
    cpu_budget = node.cpus - cpus
    ram_budget = node.ram_gb - ram_gb
    candidates = sorted({ready_ms, *(end for _, end, _, _ in rows if end > ready_ms)})
    for start in candidates:
        if _window_fits(rows, start, start + duration_ms, cpu_budget, ram_budget):
            return start
    raise AssertionError("no feasible start found past all finishes")


def _window_fits(rows, start: int, end: int, cpu_budget: int, ram_budget: int) -> bool:
    """Check that existing usage never exceeds the budgets within [start, end)."""
    # usage is a right-continuous step function; its maximum over the window
    # occurs at the window start or at a run start inside the window
    points = {start}
    points.update(s for s, _, _, _ in rows if start < s < end)
    for point in points:
        cpu = sum(c for s, e, c, _ in rows if s <= point < e)
        ram = sum(r for s, e, _, r in rows if s <= point < e)
        if cpu > cpu_budget or ram > ram_budget:
            return False
    return True


def _check_assignment(assignment: Assignment, scenario: Scenario) -> None:
    for task in scenario.tasks:
        node_id = assignment.get(task.id)
        if node_id is None:
            raise ScheduleError(f"assignment missing task {task.id}")
        node = scenario.node(node_id)
        if not task.features <= node.features:
            missing = ", ".join(sorted(task.features - node.features))
            raise ScheduleError(f"node {node.id} lacks feature(s) {missing} for {task.id}")
        if task.cpus > node.cpus or task.ram_gb > node.ram_gb:
            raise ScheduleError(f"task {task.id} does not fit node {node.id}")


def transfers_for(
    placed: Mapping[str, Placement], scenario: Scenario
) -> tuple[TransferRecord, ...]:
    """Build one TransferRecord per dependency edge from final placements."""
    records = []
    for producer_id, consumer_id in scenario.edges():
        producer = placed[producer_id]
        consumer = placed[consumer_id]
        size = scenario.task(producer_id).output_gb
        delay = transfer_ms(
            size,
            scenario.node(producer.node).data_rate_gbps,
            scenario.node(consumer.node).data_rate_gbps,
            same_node=producer.node == consumer.node,
        )
        records.append(
            TransferRecord(
                producer=producer_id,
                consumer=consumer_id,
                src=producer.node,
                dst=consumer.node,
                size_gb=size,
                depart_ms=producer.end_ms,
                arrive_ms=producer.end_ms + delay,
            )
        )
    return tuple(records)


def simulate(assignment: Assignment, scenario: Scenario, mode: SimMode) -> Schedule:
    """Deterministically schedule a fixed assignment.

    Tasks are placed in wave topological order (dependency waves, ids sorted
    within each wave) at the later of their data-arrival time and, in aware
    mode, the first capacity gap on their node.
    """
    _check_assignment(assignment, scenario)
    placed: dict[str, Placement] = {}
    by_node: dict[str, list[Placement]] = defaultdict(list)
    for task_id in topological_order(scenario):
        task = scenario.task(task_id)
        node = scenario.node(assignment[task_id])
        ready = data_ready_ms(task, assignment, placed, scenario)
        start = earliest_start_ms(
            node, task.cpus, task.ram_gb, task.duration_ms, ready,
            by_node[node.id], scenario, mode,
        )
        placement = Placement(task_id, node.id, start, start + task.duration_ms)
        placed[task_id] = placement
        by_node[node.id].append(placement)
    placements = tuple(sorted(placed.values(), key=lambda p: p.task))
    return Schedule(
        placements=placements,
        transfers=transfers_for(placed, scenario),
        makespan_ms=max(p.end_ms for p in placements),
        mode=mode,
    )


def makespan_ms(schedule: Schedule) -> int:
    """Completion time of the last task, from time zero."""
    if not schedule.placements:
        raise ScheduleError("empty schedule")
    return max(p.end_ms for p in schedule.placements)


def schedule_to_json(schedule: Schedule) -> str:
    """Render a schedule as JSON with both ms and H:MM:SS times."""
    doc = {
        "mode": schedule.mode.value,
        "makespan_ms": schedule.makespan_ms,
        "makespan": clock_str(schedule.makespan_ms),
        "placements": [
            {
                "task": p.task,
                "node": p.node,
                "start_ms": p.start_ms,
                "end_ms": p.end_ms,
                "start": clock_str(p.start_ms),
                "end": clock_str(p.end_ms),
            }
            for p in schedule.placements
        ],
        "transfers": [
            {
                "producer": t.producer,
                "consumer": t.consumer,
                "src": t.src,
                "dst": t.dst,
                "size_gb": rational_json(t.size_gb),
                "depart_ms": t.depart_ms,
                "arrive_ms": t.arrive_ms,
                "depart": clock_str(t.depart_ms),
                "arrive": clock_str(t.arrive_ms),
            }
            for t in schedule.transfers
        ],
    }
    return json.dumps(doc, indent=2) + "\n"
