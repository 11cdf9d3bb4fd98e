"""Collaborative edge computing toolkit.

Forms overlapping collaboration spaces of base stations, optimizes joint
offloading/caching decisions with a proximal block-coordinate method,
rounds to binary assignments, and simulates the resulting caching plane.
"""

from .cachesim import CacheState, HitCounters, RatSnapshot, cache_insert, hit_ratio, serve_request
from .config import ScenarioConfig, config_from_dict, load_config
from .costmodel import (
    AllocationView,
    DecisionVector,
    ModelContext,
    build_context,
    compute_share,
    device_status,
    local_energy,
    local_latency,
    local_time,
    spectrum_efficiency,
)
from .errors import (
    CacheItemTooLarge,
    ConfigError,
    CoverageError,
    InfeasibleScenarioError,
    SolverError,
    StationCsvError,
)
from .metrics import RunMetrics, delay_distribution
from .oracle import TinyInstance, brute_force_solve
from .pipeline import SolveReport, build_scenario, compare_rules, run_pipeline
from .rounding import ViolationReport, integrality_gap, penalized_resolve, threshold_round, violations
from .scenario import (
    DemandMatrix,
    ModelParams,
    Scenario,
    Task,
    UserDevice,
    WorkloadSpec,
    generate_demands,
    generate_tasks,
    zipf_popularity,
)
from .solver import SolverParams, SolveTrace, initial_point, proximal_value, run_bsum, select_block, solve_block
from .topology import (
    BaseStation,
    CollaborationSpace,
    import_stations,
    multi_assign,
    okm_objective,
    run_okm_cs,
    run_okm_cs_with_trace,
)

__version__ = "0.1.0"
