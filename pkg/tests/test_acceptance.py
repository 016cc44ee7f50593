"""Acceptance suite: one test per exit criterion, each printing a PASS/FAIL
line.  Run with `pytest -s tests/test_acceptance.py` to see the lines live.
"""

import time
from contextlib import contextmanager
from dataclasses import replace

from hetsched.harness import ModelConfig, parse_time, run_eval, render_prompt
from hetsched.scenario import Scenario, TaskSpec, builtin_scenario
from hetsched.semantics import SimMode, simulate, transfer_ms
from hetsched.solvers import enumerate_table, solve_exact
from hetsched.validator import (
    Band,
    ClaimedTransfer,
    ViolationKind,
    claim_from_schedule,
    score_band,
    validate_schedule,
)

from conftest import (
    AWARE_MAKESPANS,
    OPTIMAL_ASSIGNMENT,
    OPTIMUM_MS,
    TABLE_ROWS,
    all_builtin_assignments,
    fixture_text,
)
from timeline_oracle import oracle_simulate


@contextmanager
def criterion(number: int, summary: str):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {number} FAIL: {summary}")
        raise
    print(f"ACCEPTANCE {number} PASS: {summary}")


def test_criterion_1_enumeration_reproduces_the_reference_table():
    with criterion(1, "relaxed enumeration matches the 9-row reference table"):
        scenario = builtin_scenario()
        started = time.perf_counter()
        rows = enumerate_table(scenario, SimMode.CAPACITY_RELAXED)
        elapsed = time.perf_counter() - started
        assert elapsed < 1.0, f"enumeration took {elapsed:.3f}s"
        assert len(rows) == 9
        seen_transfers = [set(), set(), set()]
        for row in rows:
            assignment = row.assignment_dict()
            key = (assignment["Task2"], assignment["Task4"])
            transfers_s, _, makespan = TABLE_ROWS[key]
            actual = tuple(ms // 1000 for _, _, ms in row.transfers_ms)
            assert actual == transfers_s, key       # zero tolerance
            assert row.makespan_ms == makespan, key
            for slot, value in enumerate(actual):
                seen_transfers[slot].add(value)
        assert seen_transfers[0] == {0, 16, 40}     # Task1 -> Task2 column
        assert seen_transfers[1] == {0, 8, 20}      # Task2 -> Task4 column
        assert seen_transfers[2] == {0, 80}         # Task3 -> Task4 column
        makespans = {row.makespan_ms for row in rows}
        assert min(makespans) == 32_420_000         # 9:00:20
        assert max(makespans) == 32_480_000         # 9:01:20


def test_criterion_2_analytical_optimum():
    with criterion(2, "capacity-aware solve returns the analytical optimum"):
        schedule = solve_exact(builtin_scenario(), SimMode.CAPACITY_AWARE)
        assert schedule.assignment() == OPTIMAL_ASSIGNMENT
        assert schedule.makespan_ms == 32_420_000


def test_criterion_3_transfer_formula():
    with criterion(3, "transfer formula unit checks"):
        assert transfer_ms(20, 10, 10, same_node=False) == 16_000
        assert transfer_ms(10, 10, 5, same_node=False) == 16_000   # A -> B
        assert transfer_ms(10, 10, 2, same_node=False) == 40_000   # A -> C
        assert transfer_ms(0, 10, 5, same_node=False) == 0
        assert transfer_ms(20, 10, 10, same_node=True) == 0


def test_criterion_4_capacity_aware_divergence_vs_oracle():
    with criterion(4, "capacity-aware enumerator agrees with the timeline oracle"):
        scenario = builtin_scenario()
        rows = enumerate_table(scenario, SimMode.CAPACITY_AWARE)
        assert len(rows) == 9
        for row in rows:
            assignment = row.assignment_dict()
            _, oracle_makespan = oracle_simulate(assignment, scenario, capacity_aware=True)
            assert row.makespan_ms == oracle_makespan, assignment
        by_key = {
            (r.assignment_dict()["Task2"], r.assignment_dict()["Task4"]): r.makespan_ms
            for r in rows
        }
        assert by_key[("NodeC", "NodeA")] == 39_620_000  # 11:00:20
        assert by_key[("NodeC", "NodeB")] == 39_620_000  # 11:00:20
        assert by_key[("NodeC", "NodeC")] == 39_600_000  # 11:00:00
        assert AWARE_MAKESPANS == {
            key: by_key[key] for key in AWARE_MAKESPANS
        }


def test_criterion_5_validator_mutation_suite():
    with criterion(5, "all 8 substantive violation kinds detected, 0 false positives"):
        scenario = builtin_scenario()
        optimal = simulate(OPTIMAL_ASSIGNMENT, scenario, SimMode.CAPACITY_AWARE)
        base = claim_from_schedule(optimal)

        def drop_row(claim, task):
            return replace(claim, rows=tuple(r for r in claim.rows if r.task != task))

        def edit_row(claim, task, **changes):
            return replace(
                claim,
                rows=tuple(
                    replace(r, **changes) if r.task == task else r for r in claim.rows
                ),
            )

        bumped_task3 = Scenario(
            nodes=scenario.nodes,
            tasks=tuple(
                TaskSpec(t.id, 32, t.ram_gb, t.features, t.duration_ms, t.output_gb, t.deps)
                if t.id == "Task3"
                else t
                for t in scenario.tasks
            ),
            meta=scenario.meta,
        )
        no_transfers = replace(base, transfers=())
        mutations = [
            (ViolationKind.UNASSIGNED_TASK, drop_row(base, "Task4"), scenario),
            (
                ViolationKind.MULTIPLE_ASSIGNMENT,
                replace(base, rows=base.rows + (base.rows[-1],)),
                scenario,
            ),
            (ViolationKind.PER_TASK_DEMAND_EXCEEDS_NODE, base, bumped_task3),
            (
                ViolationKind.NODE_CAPACITY_EXCEEDED,
                edit_row(no_transfers, "Task2", node="NodeC"),
                scenario,
            ),
            (
                ViolationKind.MISSING_FEATURE,
                edit_row(no_transfers, "Task1", node="NodeB"),
                scenario,
            ),
            (
                ViolationKind.PREMATURE_START,
                edit_row(no_transfers, "Task4", start_ms=18_000_000, end_ms=32_400_000),
                scenario,
            ),
            (
                ViolationKind.DURATION_MISMATCH,
                edit_row(no_transfers, "Task4", end_ms=32_440_000),
                scenario,
            ),
            (
                ViolationKind.TRANSFER_ARITHMETIC_MISMATCH,
                replace(
                    base,
                    transfers=base.transfers
                    + (ClaimedTransfer("Task4", 30_000, producer="Task2"),),
                ),
                scenario,
            ),
        ]
        assert len(mutations) == 8
        detected = 0
        for kind, claim, instance in mutations:
            report = validate_schedule(claim, instance)
            assert not report.adherent, kind
            assert kind in report.kinds(), (kind, report.violations)
            detected += 1
        assert detected == 8  # 100% detection

        # false-positive rate 0% over all nine simulated schedules
        for assignment in all_builtin_assignments():
            schedule = simulate(assignment, scenario, SimMode.CAPACITY_AWARE)
            assert validate_schedule(schedule, scenario).adherent


def test_criterion_6_band_fixtures():
    with criterion(6, "the 21 surveyed makespan strings band correctly"):
        from test_harness import SURVEYED_MAKESPANS

        bands = [
            score_band(parse_time(text), OPTIMUM_MS, tolerance_ms=120_000)
            for text, _ in SURVEYED_MAKESPANS
        ]
        assert len(bands) == 21
        assert bands.count(Band.OPTIMAL) == 3
        expectations = {
            "9h 20s": Band.OPTIMAL,
            "9h 1m 20s": Band.NEAR_OPTIMAL,
            "20h 16s": Band.SUBOPTIMAL,
            "11h": Band.SUBOPTIMAL,
            "12h 32m": Band.SUBOPTIMAL,
            "9h 16m 32s": Band.SUBOPTIMAL,
            "9h": Band.BELOW_OPTIMUM,
            "9h 8s": Band.BELOW_OPTIMUM,
            "9h 4s": Band.BELOW_OPTIMUM,
        }
        for text, band in expectations.items():
            assert score_band(parse_time(text), OPTIMUM_MS) is band, text
        assert parse_time("9h 60s") == parse_time("9:01:00")
        assert score_band(parse_time("9h 60s"), OPTIMUM_MS) is Band.NEAR_OPTIMAL
        for (text, expected), band in zip(SURVEYED_MAKESPANS, bands):
            assert band is expected, text


def test_criterion_7_golden_prompt():
    with criterion(7, "rendered prompt is byte-identical to the golden file"):
        from importlib import resources

        golden = (
            resources.files("hetsched").joinpath("data/prompt.golden.txt").read_text("utf-8")
        )
        assert render_prompt(builtin_scenario()) == golden


def test_criterion_8_harness_end_to_end(stub_server, tmp_path):
    with criterion(8, "stub-endpoint evaluation yields {Optimal, Suboptimal} twice over"):
        _, url = stub_server(
            {
                "stub-optimal": {"text": fixture_text("optimal_table.txt")},
                "stub-prose": {"text": fixture_text("prose_11h.txt")},
            }
        )
        configs = [
            ModelConfig(endpoint=url, model="stub-optimal", timeout_ms=5_000),
            ModelConfig(endpoint=url, model="stub-prose", timeout_ms=5_000),
        ]
        scenario = builtin_scenario()
        first = run_eval(scenario, configs, tmp_path / "one")
        second = run_eval(scenario, configs, tmp_path / "two")
        for records in (first, second):
            assert [r.band for r in records] == [Band.OPTIMAL, Band.SUBOPTIMAL]
            assert all(r.latency_ok for r in records)
            assert all(r.transport_status == "ok" for r in records)
        for name in ("report.csv", "report.json", "report.txt"):
            assert (tmp_path / "one" / name).read_bytes() == (
                tmp_path / "two" / name
            ).read_bytes()


def test_criterion_9_scope_note():
    with criterion(9, "live multi-model results are out of desk-scale scope"):
        # The surveyed models' qualitative columns (reasoning, explanation,
        # code quality) stay manual-annotation fields; automated coverage
        # rests on the fixture suites (criteria 6 and 8) and the per-module
        # property tests.  Nothing to execute beyond asserting the manual
        # slots exist and default to unset.
        from hetsched.harness import EvalRecord

        fields = set(EvalRecord.__dataclass_fields__)
        assert {"reasoning", "explanation", "code_quality"} <= fields
