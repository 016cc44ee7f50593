"""Transfer-aware mapping and scheduling of task DAGs onto heterogeneous
nodes, with exact enumeration, a HEFT baseline, a constraint validator, and
a harness that scores natural-language schedule answers."""

from .scenario import (
    NodeSpec,
    Scenario,
    ScenarioDefect,
    ScenarioError,
    ScenarioMeta,
    TaskSpec,
    builtin_scenario,
    load_scenario,
    parse_scenario,
    serialize_scenario,
    topological_order,
    validate_scenario,
)
from .semantics import (
    Placement,
    Schedule,
    ScheduleError,
    SimMode,
    TransferRecord,
    data_ready_ms,
    earliest_start_ms,
    makespan_ms,
    schedule_to_json,
    simulate,
    transfer_ms,
)
from .solvers import (
    EnumerationLimitError,
    EnumRow,
    enumerate_table,
    enumeration_csv,
    feasible_nodes,
    heft_rank,
    solve_exact,
    solve_heft,
)
from .validator import (
    Band,
    ClaimRow,
    ClaimedTransfer,
    Metrics,
    ScheduleClaim,
    ValidationReport,
    Violation,
    ViolationKind,
    compute_metrics,
    score_band,
    validate_schedule,
)
from .harness import (
    EvalRecord,
    ModelConfig,
    ParsedSchedule,
    Transcript,
    format_time,
    parse_response,
    parse_time,
    query_model,
    render_prompt,
    run_eval,
    score_response,
    write_report,
)

__version__ = "0.1.0"
