from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from hetsched.scenario import Scenario
from hetsched.semantics import (
    Placement,
    ScheduleError,
    SimMode,
    data_ready_ms,
    earliest_start_ms,
    makespan_ms,
    schedule_to_json,
    simulate,
    transfer_ms,
)
from hetsched.validator import validate_schedule

from conftest import (
    AWARE_MAKESPANS,
    OPTIMAL_ASSIGNMENT,
    TABLE_ROWS,
    all_builtin_assignments,
    builtin_assignment,
)
from test_scenario import _node, _task, scenarios
from timeline_oracle import oracle_earliest_start, oracle_simulate


# --- transfer arithmetic -----------------------------------------------------

def test_transfer_worked_example():
    # 20 GB to a 10 Gbps node: 20 * 8 / 10 = 16 seconds
    assert transfer_ms(20, 10, 10, same_node=False) == 16_000


def test_transfer_rate_pairs():
    assert transfer_ms(10, 10, 5, same_node=False) == 16_000   # A -> B
    assert transfer_ms(10, 10, 2, same_node=False) == 40_000   # A -> C
    assert transfer_ms(20, 2, 10, same_node=False) == 80_000   # C -> A
    assert transfer_ms(5, 10, 2, same_node=False) == 20_000    # A -> C, 5 GB


def test_transfer_degenerate_cases():
    assert transfer_ms(123, 1, 1, same_node=True) == 0
    assert transfer_ms(0, 10, 5, same_node=False) == 0
    with pytest.raises(ScheduleError):
        transfer_ms(1, 0, 5, same_node=False)
    with pytest.raises(ScheduleError):
        transfer_ms(1, 5, -1, same_node=False)


def test_transfer_rounds_up_to_ms():
    # 1 GB at 3 Gbps = 8/3 s = 2666.66... ms, must round up
    assert transfer_ms(1, 3, 3, same_node=False) == 2_667


@given(
    size=st.fractions(min_value=0, max_value=100, max_denominator=16),
    bigger=st.fractions(min_value=Fraction(1, 4), max_value=50, max_denominator=16),
    other=st.fractions(min_value=Fraction(1, 4), max_value=50, max_denominator=16),
    delta=st.fractions(min_value=0, max_value=10, max_denominator=16),
)
def test_transfer_properties(size, bigger, other, delta):
    # symmetric in the two rates
    assert transfer_ms(size, bigger, other) == transfer_ms(size, other, bigger)
    # monotone non-decreasing in size
    assert transfer_ms(size + delta, bigger, other) >= transfer_ms(size, bigger, other)
    # non-increasing as the bottleneck rate grows
    assert transfer_ms(size, bigger + delta, other) <= transfer_ms(size, bigger, other)
    assert transfer_ms(0, bigger, other) == 0


# --- data arrival ------------------------------------------------------------

def test_data_ready_for_task4(builtin):
    placed = {
        "Task2": Placement("Task2", "NodeA", 10_800_000, 18_000_000),
        "Task3": Placement("Task3", "NodeC", 0, 18_000_000),
    }
    ready = data_ready_ms(
        builtin.task("Task4"), {"Task4": "NodeC"}, placed, builtin
    )
    assert ready == 18_020_000  # 5:00:20


def test_data_ready_no_deps_is_zero(builtin):
    assert data_ready_ms(builtin.task("Task1"), {"Task1": "NodeA"}, {}, builtin) == 0


def test_data_ready_cross_node(builtin):
    placed = {"Task1": Placement("Task1", "NodeA", 0, 10_800_000)}
    ready = data_ready_ms(builtin.task("Task2"), {"Task2": "NodeB"}, placed, builtin)
    assert ready == 10_816_000  # 3:00:16


def test_data_ready_requires_placed_deps(builtin):
    with pytest.raises(ScheduleError, match="not placed"):
        data_ready_ms(builtin.task("Task2"), {"Task2": "NodeB"}, {}, builtin)


# --- earliest start under capacity ------------------------------------------

def test_earliest_start_after_predecessor_finishes(builtin):
    node = builtin.node("NodeA")
    existing = [Placement("Task1", "NodeA", 0, 10_800_000)]
    start = earliest_start_ms(
        node, 4, 16, 7_200_000, 10_800_000, existing, builtin, SimMode.CAPACITY_AWARE
    )
    assert start == 10_800_000


def test_earliest_start_waits_for_capacity(builtin):
    # expected value recomputed by the brute-force oracle
    expected = oracle_earliest_start(
        [(0, 18_000_000, 16, 64)], 10_840_000, 7_200_000, 16, 64, 4, 16
    )
    assert expected == 18_000_000
    node = builtin.node("NodeC")
    existing = [Placement("Task3", "NodeC", 0, 18_000_000)]
    start = earliest_start_ms(
        node, 4, 16, 7_200_000, 10_840_000, existing, builtin, SimMode.CAPACITY_AWARE
    )
    assert start == expected


def test_earliest_start_relaxed_ignores_occupancy(builtin):
    node = builtin.node("NodeC")
    existing = [Placement("Task3", "NodeC", 0, 18_000_000)]
    start = earliest_start_ms(
        node, 4, 16, 7_200_000, 10_840_000, existing, builtin, SimMode.CAPACITY_RELAXED
    )
    assert start == 10_840_000


def test_earliest_start_empty_node(builtin):
    node = builtin.node("NodeB")
    assert (
        earliest_start_ms(node, 8, 32, 1000, 0, [], builtin, SimMode.CAPACITY_AWARE)
        == 0
    )


def test_earliest_start_inserts_into_gap():
    scenario = Scenario(
        nodes=(_node("n", cpus=4, ram=4),),
        tasks=(
            _task("early", cpus=4, ram=4, duration=1_000),
            _task("late", cpus=4, ram=4, duration=1_000),
            _task("probe", cpus=4, ram=4, duration=500),
        ),
    )
    existing = [
        Placement("early", "n", 0, 1_000),
        Placement("late", "n", 2_000, 3_000),
    ]
    start = earliest_start_ms(
        scenario.node("n"), 4, 4, 500, 0, existing, scenario, SimMode.CAPACITY_AWARE
    )
    assert start == 1_000  # fits between the two runs


def test_earliest_start_rejects_oversized_demand(builtin):
    node = builtin.node("NodeC")
    with pytest.raises(ScheduleError, match="exceeds node"):
        earliest_start_ms(node, 32, 16, 1000, 0, [], builtin, SimMode.CAPACITY_AWARE)


# --- simulate ----------------------------------------------------------------

def test_simulate_optimal_assignment(builtin):
    schedule = simulate(OPTIMAL_ASSIGNMENT, builtin, SimMode.CAPACITY_AWARE)
    assert schedule.makespan_ms == 32_420_000  # 9h 0m 20s
    assert schedule.placement("Task4").start_ms == 18_020_000
    assert makespan_ms(schedule) == 32_420_000


def test_simulate_relaxed_row_cc(builtin):
    schedule = simulate(
        builtin_assignment("NodeC", "NodeC"), builtin, SimMode.CAPACITY_RELAXED
    )
    assert schedule.makespan_ms == 32_440_000  # 9:00:40


def test_simulate_aware_row_cc_defers_task2(builtin):
    schedule = simulate(
        builtin_assignment("NodeC", "NodeC"), builtin, SimMode.CAPACITY_AWARE
    )
    assert schedule.placement("Task2").start_ms == 18_000_000
    assert schedule.makespan_ms == 39_600_000  # 11:00:00, from the oracle


def test_simulate_matches_table_for_all_nine_rows(builtin):
    for assignment in all_builtin_assignments():
        key = (assignment["Task2"], assignment["Task4"])
        transfers_s, t4_start, relaxed_makespan = TABLE_ROWS[key]
        schedule = simulate(assignment, builtin, SimMode.CAPACITY_RELAXED)
        assert schedule.makespan_ms == relaxed_makespan, key
        assert schedule.placement("Task4").start_ms == t4_start, key
        durations = tuple(t.duration_ms // 1000 for t in schedule.transfers)
        assert durations == transfers_s, key


def test_simulate_matches_oracle_on_all_nine_rows(builtin):
    for assignment in all_builtin_assignments():
        for mode in SimMode:
            schedule = simulate(assignment, builtin, mode)
            done, makespan = oracle_simulate(
                assignment, builtin, capacity_aware=mode is SimMode.CAPACITY_AWARE
            )
            assert schedule.makespan_ms == makespan, (assignment, mode)
            for placement in schedule.placements:
                node, start, end = done[placement.task]
                assert (placement.node, placement.start_ms, placement.end_ms) == (
                    node,
                    start,
                    end,
                ), (assignment, mode)
        key = (assignment["Task2"], assignment["Task4"])
        if key in AWARE_MAKESPANS:
            aware = simulate(assignment, builtin, SimMode.CAPACITY_AWARE)
            assert aware.makespan_ms == AWARE_MAKESPANS[key]


def test_simulate_transfer_records_cover_edges(builtin, optimal_schedule):
    assert [(t.producer, t.consumer) for t in optimal_schedule.transfers] == [
        ("Task1", "Task2"),
        ("Task2", "Task4"),
        ("Task3", "Task4"),
    ]
    for record in optimal_schedule.transfers:
        assert record.depart_ms == optimal_schedule.placement(record.producer).end_ms
        if record.src == record.dst:
            assert record.duration_ms == 0


def test_simulate_is_deterministic(builtin):
    first = simulate(OPTIMAL_ASSIGNMENT, builtin, SimMode.CAPACITY_AWARE)
    second = simulate(dict(OPTIMAL_ASSIGNMENT), builtin, SimMode.CAPACITY_AWARE)
    assert first == second
    assert schedule_to_json(first) == schedule_to_json(second)


def test_simulate_rejects_bad_assignments(builtin):
    with pytest.raises(ScheduleError, match="lacks feature"):
        simulate(builtin_assignment("NodeC", "NodeC") | {"Task1": "NodeB"}, builtin,
                 SimMode.CAPACITY_AWARE)
    with pytest.raises(ScheduleError, match="missing task"):
        simulate({"Task1": "NodeA"}, builtin, SimMode.CAPACITY_AWARE)
    small = Scenario(
        nodes=(_node("tiny", cpus=4, ram=4),),
        tasks=(_task("big", cpus=8, ram=2),),
    )
    with pytest.raises(ScheduleError, match="does not fit"):
        simulate({"big": "tiny"}, small, SimMode.CAPACITY_AWARE)


def test_makespan_single_task():
    scenario = Scenario(nodes=(_node("n"),), tasks=(_task("t", duration=10_800_000),))
    schedule = simulate({"t": "n"}, scenario, SimMode.CAPACITY_AWARE)
    assert schedule.makespan_ms == 10_800_000


def test_makespan_row_ab(builtin):
    schedule = simulate(
        builtin_assignment("NodeA", "NodeB"), builtin, SimMode.CAPACITY_RELAXED
    )
    assert schedule.makespan_ms == 32_480_000  # 9:01:20


# --- properties over random instances ----------------------------------------

@st.composite
def scenario_and_assignment(draw):
    scenario = draw(scenarios())
    assignment = {
        t.id: draw(st.sampled_from([n.id for n in scenario.nodes]))
        for t in scenario.tasks
    }
    return scenario, assignment


@settings(max_examples=60, deadline=None)
@given(scenario_and_assignment())
def test_simulate_agrees_with_oracle(case):
    scenario, assignment = case
    for mode in SimMode:
        schedule = simulate(assignment, scenario, mode)
        done, makespan = oracle_simulate(
            assignment, scenario, capacity_aware=mode is SimMode.CAPACITY_AWARE
        )
        assert schedule.makespan_ms == makespan
        for placement in schedule.placements:
            assert done[placement.task] == (
                placement.node,
                placement.start_ms,
                placement.end_ms,
            )


@settings(max_examples=60, deadline=None)
@given(scenario_and_assignment())
def test_relaxed_never_slower_than_aware(case):
    scenario, assignment = case
    relaxed = simulate(assignment, scenario, SimMode.CAPACITY_RELAXED)
    aware = simulate(assignment, scenario, SimMode.CAPACITY_AWARE)
    assert relaxed.makespan_ms <= aware.makespan_ms


@settings(max_examples=60, deadline=None)
@given(scenario_and_assignment())
def test_simulate_outputs_satisfy_contracts(case):
    scenario, assignment = case
    placed = {}
    schedule = simulate(assignment, scenario, SimMode.CAPACITY_AWARE)
    for placement in schedule.placements:
        task = scenario.task(placement.task)
        assert placement.end_ms - placement.start_ms == task.duration_ms
        placed[placement.task] = placement
    for placement in schedule.placements:
        task = scenario.task(placement.task)
        assert placement.start_ms >= data_ready_ms(task, assignment, placed, scenario)
    report = validate_schedule(schedule, scenario)
    assert report.adherent, report.violations
