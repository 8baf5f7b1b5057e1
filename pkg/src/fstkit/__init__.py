"""fstkit: few-shot scenario testing for crash-rate estimation.

Synthesizes strictly size-limited test-scenario sets whose coverage-
weighted estimate of a vehicle's crash rate carries a minimized
worst-case error over a family of surrogate driver models, and benchmarks
the approach against Monte Carlo baselines on a simulated cut-in
encounter.
"""
from .baselines import BaselineDraw, cmc_sample, estimate, halton, rqmc_sample
from .cutin_sim import (
    CrashMap,
    IdmParams,
    SimConfig,
    SurrogateSet,
    compute_crash_map,
    convex_combine,
    crash_map_to_csv,
    crash_rate,
    idm_acceleration,
    simulate_cutin,
)
from .fst_estimator import (
    CoveragePartition,
    TestSet,
    estimate_mu,
    fluctuation,
    partition,
    partition_to_csv,
    similarity,
    similarity_cap,
)
from .fst_optimizer import (
    ObjectiveReport,
    OptimizerConfig,
    evaluate_av,
    objective,
    synthesize,
)
from .harness import (
    ExperimentConfig,
    TrialRecord,
    World,
    build_world,
    config_hash,
    default_config,
    fan_seed,
    load_config,
    oracle_mu,
    run_experiment,
    summarize,
)
from .scenario_space import (
    ConfigError,
    ExposurePmf,
    Scenario,
    ScenarioGrid,
    build_exposure,
    build_grid,
    normalize,
)

__version__ = "0.1.0"
