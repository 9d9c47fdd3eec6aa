"""Experiment harness: configs, sessions, sweeps and attack demonstrations."""

from .config import (
    ConfigError,
    ExperimentConfig,
    analyst_from_spec,
    query_from_spec,
    random_type_b_analyst,
)
from .experiments import (
    SWEEP_COLUMNS,
    EscapeError,
    InvariantViolation,
    RunResult,
    attack_sweep,
    continuous_mode_session,
    counterexample_demo,
    envelope,
    exceedance_rate,
    fit_exponent,
    generalization_error,
    hoeffding_baseline,
    interleaving_demo,
    overfit_attack,
    per_round_errors,
    run_session,
    scaling_sweep,
    sweep_to_csv,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "analyst_from_spec",
    "query_from_spec",
    "random_type_b_analyst",
    "SWEEP_COLUMNS",
    "EscapeError",
    "InvariantViolation",
    "RunResult",
    "attack_sweep",
    "continuous_mode_session",
    "counterexample_demo",
    "envelope",
    "exceedance_rate",
    "fit_exponent",
    "generalization_error",
    "hoeffding_baseline",
    "interleaving_demo",
    "overfit_attack",
    "per_round_errors",
    "run_session",
    "scaling_sweep",
    "sweep_to_csv",
]
