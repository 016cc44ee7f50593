"""Problem instances: heterogeneous nodes, tasks, and the dependency DAG.

A Scenario is immutable after construction.  Parsing enforces referential
integrity (unique ids, resolvable dependencies, positive capacities) by
raising ScenarioError; graph-level problems (cycles, tasks with no feasible
node) are reported by `validate_scenario` as defect values instead, so a
structurally sound file can still be inspected.

Scenario files are JSON with top-level keys `nodes` and `tasks` plus an
optional `meta` block; see the README for the schema.  Durations are given
in hours (integer or decimal) or in milliseconds, and are stored internally
as integer milliseconds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .timefmt import MS_PER_HOUR

DEFAULT_OBJECTIVES = "1. Minimize makespan, \n2. Optimum Resource Utilization."
DEFAULT_CONSTRAINTS = (
    "1. One task should be assigned to only one node.\n"
    "2. Task should be assigned within the node capacity.\n"
    "3. Task feature request should be respected.\n"
    "4. Task dependency should be respected.\n"
    "5. Data transfer time should be considered in case if dependent tasks"
    " are assigned to different nodes."
)


class ScenarioError(ValueError):
    """Malformed scenario file or invalid instance data."""


def _rational(value, where: str) -> Fraction:
    """Coerce a JSON value (int, decimal, or "p/q" string) to a Fraction."""
    if isinstance(value, bool):
        raise ScenarioError(f"{where}: expected a number, got {value!r}")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(str(value))
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ScenarioError(f"{where}: not a number: {value!r}") from exc
    raise ScenarioError(f"{where}: expected a number, got {value!r}")


def _positive_int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"{where}: expected an integer, got {value!r}")
    if value < 1:
        raise ScenarioError(f"{where}: must be >= 1, got {value}")
    return value


def _features(value, where: str) -> frozenset[str]:
    if not isinstance(value, (list, tuple, set, frozenset)):
        raise ScenarioError(f"{where}: features must be a list of tags")
    tags = set()
    for tag in value:
        if not isinstance(tag, str) or not tag.strip():
            raise ScenarioError(f"{where}: bad feature tag {tag!r}")
        tags.add(tag.strip().upper())
    return frozenset(tags)


@dataclass(frozen=True)
class NodeSpec:
    """One compute node: capacity, hardware feature tags, link rate."""

    id: str
    cpus: int
    ram_gb: int
    features: frozenset[str]
    data_rate_gbps: Fraction

    def __post_init__(self):
        if not self.id:
            raise ScenarioError("node with empty id")
        _positive_int(self.cpus, f"node {self.id}: cpus")
        _positive_int(self.ram_gb, f"node {self.id}: ram_gb")
        if not self.features:
            raise ScenarioError(f"node {self.id}: features must be nonempty")
        if self.data_rate_gbps <= 0:
            raise ScenarioError(f"node {self.id}: non-positive data rate")


@dataclass(frozen=True)
class TaskSpec:
    """One task: resource demand, required features, runtime, output size."""

    id: str
    cpus: int
    ram_gb: int
    features: frozenset[str]
    duration_ms: int
    output_gb: Fraction
    deps: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.id:
            raise ScenarioError("task with empty id")
        _positive_int(self.cpus, f"task {self.id}: cpus")
        _positive_int(self.ram_gb, f"task {self.id}: ram_gb")
        if self.duration_ms <= 0:
            raise ScenarioError(f"task {self.id}: duration must be positive")
        if self.output_gb < 0:
            raise ScenarioError(f"task {self.id}: negative output size")
        # drop duplicate dependency entries, keeping first occurrence
        deduped = tuple(dict.fromkeys(self.deps))
        object.__setattr__(self, "deps", deduped)


@dataclass(frozen=True)
class ScenarioMeta:
    """Free-text objectives/constraints carried for prompt rendering only."""

    objectives: str = DEFAULT_OBJECTIVES
    constraints: str = DEFAULT_CONSTRAINTS


@dataclass(frozen=True)
class Scenario:
    """A full problem instance: nodes, tasks, and inert metadata."""

    nodes: tuple[NodeSpec, ...]
    tasks: tuple[TaskSpec, ...]
    meta: ScenarioMeta = ScenarioMeta()
    _node_index: Mapping[str, NodeSpec] = field(
        init=False, repr=False, compare=False, default=None
    )
    _task_index: Mapping[str, TaskSpec] = field(
        init=False, repr=False, compare=False, default=None
    )

    def __post_init__(self):
        if not self.nodes:
            raise ScenarioError("no nodes")
        if not self.tasks:
            raise ScenarioError("no tasks")
        node_index: dict[str, NodeSpec] = {}
        for node in self.nodes:
            if node.id in node_index:
                raise ScenarioError(f"duplicate node id {node.id}")
            node_index[node.id] = node
        task_index: dict[str, TaskSpec] = {}
        for task in self.tasks:
            if task.id in task_index:
                raise ScenarioError(f"duplicate task id {task.id}")
            task_index[task.id] = task
        for task in self.tasks:
            for dep in task.deps:
                if dep not in task_index:
                    raise ScenarioError(f"unknown dependency {dep} (task {task.id})")
        object.__setattr__(self, "_node_index", node_index)
        object.__setattr__(self, "_task_index", task_index)

    def node(self, node_id: str) -> NodeSpec:
        try:
            return self._node_index[node_id]
        except KeyError:
            raise ScenarioError(f"unknown node {node_id}") from None

    def task(self, task_id: str) -> TaskSpec:
        try:
            return self._task_index[task_id]
        except KeyError:
            raise ScenarioError(f"unknown task {task_id}") from None

    def has_node(self, node_id: str) -> bool:
        return node_id in self._node_index

    def has_task(self, task_id: str) -> bool:
        return task_id in self._task_index

    def edges(self) -> list[tuple[str, str]]:
        """Dependency edges as (producer, consumer), grouped by consumer id."""
        out = []
        for task in sorted(self.tasks, key=lambda t: t.id):
            for dep in task.deps:
                out.append((dep, task.id))
        return out


def node_can_run(node: NodeSpec, task: TaskSpec) -> bool:
    """True when the node offers every required feature and fits the demand."""
    return (
        task.features <= node.features
        and task.cpus <= node.cpus
        and task.ram_gb <= node.ram_gb
    )


@dataclass(frozen=True)
class ScenarioDefect:
    """One instance-level problem found by validate_scenario."""

    kind: str  # "CycleDetected" | "NoFeasibleNode"
    subjects: tuple[str, ...]
    detail: str


def validate_scenario(scenario: Scenario) -> list[ScenarioDefect]:
    """Check graph-level soundness; returns defects instead of raising.

    An empty list means the dependency graph is acyclic and every task has
    at least one feature-and-capacity-feasible node.
    """
    defects: list[ScenarioDefect] = []
    stuck = _cycle_members(scenario)
    if stuck:
        defects.append(
            ScenarioDefect(
                kind="CycleDetected",
                subjects=tuple(sorted(stuck)),
                detail="dependency cycle through " + ", ".join(sorted(stuck)),
            )
        )
    for task in scenario.tasks:
        if not any(node_can_run(node, task) for node in scenario.nodes):
            wanted = ", ".join(sorted(task.features)) or "(none)"
            defects.append(
                ScenarioDefect(
                    kind="NoFeasibleNode",
                    subjects=(task.id,),
                    detail=(
                        f"no node offers features [{wanted}] with"
                        f" {task.cpus} cpus / {task.ram_gb} GB for {task.id}"
                    ),
                )
            )
    return defects


def _cycle_members(scenario: Scenario) -> set[str]:
    """Task ids that cannot be topologically ordered (i.e. sit on a cycle)."""
    pending = {t.id: set(t.deps) for t in scenario.tasks}
    done: set[str] = set()
    while True:
        ready = [tid for tid, deps in pending.items() if deps <= done]
        if not ready:
            break
        for tid in ready:
            done.add(tid)
            del pending[tid]
    return set(pending)


def topological_order(scenario: Scenario) -> list[str]:
    """Order task ids so every task follows all of its dependencies.

    Tasks are released in dependency waves (all tasks whose dependencies
    are already ordered), sorted by id within each wave.  This pins one
    deterministic order for any DAG and raises ScenarioError on cycles.
    """
    pending = {t.id: set(t.deps) for t in scenario.tasks}
    done: set[str] = set()
    order: list[str] = []
    while pending:
        wave = sorted(tid for tid, deps in pending.items() if deps <= done)
        if not wave:
            raise ScenarioError(
                "dependency cycle through " + ", ".join(sorted(pending))
            )
        for tid in wave:
            order.append(tid)
            done.add(tid)
            del pending[tid]
    return order


# --- file format -----------------------------------------------------------

_NODE_KEYS = {"id", "cpus", "ram_gb", "features", "data_rate_gbps"}
_TASK_KEYS = {"id", "cpus", "ram_gb", "features", "duration_h", "duration_ms",
              "output_gb", "deps"}


def parse_scenario(text: str) -> Scenario:
    """Parse a scenario JSON document.

    Durations given as `duration_h` (integer or decimal hours) are converted
    to milliseconds exactly; a non-integral result is rejected.  Syntax
    errors carry the line/column position reported by the JSON parser.
    """
    try:
        doc = json.loads(text, parse_float=lambda s: Fraction(s))
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(doc, dict):
        raise ScenarioError("top level must be a JSON object")
    unknown = set(doc) - {"nodes", "tasks", "meta"}
    if unknown:
        raise ScenarioError(f"unknown top-level keys: {sorted(unknown)}")
    nodes = [_parse_node(entry, i) for i, entry in enumerate(_array(doc, "nodes"))]
    tasks = [_parse_task(entry, i) for i, entry in enumerate(_array(doc, "tasks"))]
    meta = _parse_meta(doc.get("meta"))
    return Scenario(nodes=tuple(nodes), tasks=tuple(tasks), meta=meta)


def _array(doc: dict, key: str) -> list:
    value = doc.get(key)
    if not isinstance(value, list):
        raise ScenarioError(f"missing or non-array {key!r}")
    return value


def _entry_id(entry: dict, where: str) -> str:
    value = entry.get("id")
    if not isinstance(value, str) or not value:
        raise ScenarioError(f"{where}: missing or empty id")
    return value


def _parse_node(entry, index: int) -> NodeSpec:
    where = f"nodes[{index}]"
    if not isinstance(entry, dict):
        raise ScenarioError(f"{where}: expected an object")
    unknown = set(entry) - _NODE_KEYS
    if unknown:
        raise ScenarioError(f"{where}: unknown keys {sorted(unknown)}")
    node_id = _entry_id(entry, where)
    return NodeSpec(
        id=node_id,
        cpus=_positive_int(entry.get("cpus"), f"{where}: cpus"),
        ram_gb=_positive_int(entry.get("ram_gb"), f"{where}: ram_gb"),
        features=_features(entry.get("features"), where),
        data_rate_gbps=_rational(entry.get("data_rate_gbps"), f"{where}: data_rate_gbps"),
    )


def _parse_task(entry, index: int) -> TaskSpec:
    where = f"tasks[{index}]"
    if not isinstance(entry, dict):
        raise ScenarioError(f"{where}: expected an object")
    unknown = set(entry) - _TASK_KEYS
    if unknown:
        raise ScenarioError(f"{where}: unknown keys {sorted(unknown)}")
    task_id = _entry_id(entry, where)
    duration_ms = _parse_duration_fields(entry, where)
    deps = entry.get("deps", [])
    if not isinstance(deps, list) or not all(isinstance(d, str) for d in deps):
        raise ScenarioError(f"{where}: deps must be a list of task ids")
    return TaskSpec(
        id=task_id,
        cpus=_positive_int(entry.get("cpus"), f"{where}: cpus"),
        ram_gb=_positive_int(entry.get("ram_gb"), f"{where}: ram_gb"),
        features=_features(entry.get("features", []), where),
        duration_ms=duration_ms,
        output_gb=_rational(entry.get("output_gb", 0), f"{where}: output_gb"),
        deps=tuple(deps),
    )


def _parse_duration_fields(entry: dict, where: str) -> int:
    has_h = "duration_h" in entry
    has_ms = "duration_ms" in entry
    if has_h == has_ms:
        raise ScenarioError(f"{where}: give exactly one of duration_h / duration_ms")
    if has_ms:
        value = entry["duration_ms"]
        if isinstance(value, bool) or not isinstance(value, int) or value <= 0:
            raise ScenarioError(f"{where}: duration_ms must be a positive integer")
        return value
    hours = _rational(entry["duration_h"], f"{where}: duration_h")
    ms = hours * MS_PER_HOUR
    if ms.denominator != 1:
        raise ScenarioError(f"{where}: duration_h does not convert to whole ms")
    return int(ms)


def _parse_meta(value) -> ScenarioMeta:
    if value is None:
        return ScenarioMeta()
    if not isinstance(value, dict):
        raise ScenarioError("meta: expected an object")
    unknown = set(value) - {"objectives", "constraints"}
    if unknown:
        raise ScenarioError(f"meta: unknown keys {sorted(unknown)}")
    meta = ScenarioMeta()
    objectives = value.get("objectives", meta.objectives)
    constraints = value.get("constraints", meta.constraints)
    if not isinstance(objectives, str) or not isinstance(constraints, str):
        raise ScenarioError("meta: objectives/constraints must be strings")
    return ScenarioMeta(objectives=objectives, constraints=constraints)


def rational_json(value: Fraction):
    """Fraction to JSON value: int when integral, else an exact "p/q" string."""
    if value.denominator == 1:
        return int(value)
    return f"{value.numerator}/{value.denominator}"


def serialize_scenario(scenario: Scenario) -> str:
    """Render a Scenario back to its JSON document form (stable layout)."""
    doc = {
        "nodes": [
            {
                "id": n.id,
                "cpus": n.cpus,
                "ram_gb": n.ram_gb,
                "features": sorted(n.features),
                "data_rate_gbps": rational_json(n.data_rate_gbps),
            }
            for n in scenario.nodes
        ],
        "tasks": [_task_doc(t) for t in scenario.tasks],
        "meta": {
            "objectives": scenario.meta.objectives,
            "constraints": scenario.meta.constraints,
        },
    }
    return json.dumps(doc, indent=2) + "\n"


def _task_doc(task: TaskSpec) -> dict:
    doc: dict = {
        "id": task.id,
        "cpus": task.cpus,
        "ram_gb": task.ram_gb,
        "features": sorted(task.features),
    }
    if task.duration_ms % MS_PER_HOUR == 0:
        doc["duration_h"] = task.duration_ms // MS_PER_HOUR
    else:
        doc["duration_ms"] = task.duration_ms
    doc["output_gb"] = rational_json(task.output_gb)
    doc["deps"] = list(task.deps)
    return doc


def builtin_scenario() -> Scenario:
    """The bundled 3-node / 4-task sample instance (scenarios/paper.json)."""
    gb = Fraction
    return Scenario(
        nodes=(
            NodeSpec("NodeA", 32, 128, frozenset({"CPU", "GPU"}), gb(10)),
            NodeSpec("NodeB", 64, 256, frozenset({"CPU"}), gb(5)),
            NodeSpec("NodeC", 16, 64, frozenset({"CPU", "SSD"}), gb(2)),
        ),
        tasks=(
            TaskSpec("Task1", 8, 32, frozenset({"GPU"}), 3 * MS_PER_HOUR, gb(10), ()),
            TaskSpec("Task2", 4, 16, frozenset({"CPU"}), 2 * MS_PER_HOUR, gb(5), ("Task1",)),
            TaskSpec("Task3", 16, 64, frozenset({"CPU", "SSD"}), 5 * MS_PER_HOUR, gb(20), ()),
            TaskSpec("Task4", 8, 32, frozenset({"CPU"}), 4 * MS_PER_HOUR, gb(15), ("Task2", "Task3")),
        ),
    )


def load_scenario(path_or_builtin: str) -> Scenario:
    """Load a scenario from a file path, or the builtin instance for "builtin"."""
    if path_or_builtin == "builtin":
        return builtin_scenario()
    with open(path_or_builtin, "r", encoding="utf-8") as handle:
        return parse_scenario(handle.read())
