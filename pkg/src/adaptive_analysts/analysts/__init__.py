"""Analyst families: progressive, conservative (types A and B) and adversarial."""

from .adversarial import (
    InterleavingAnalyst,
    PrecisionExhausted,
    ReservedValueAdversary,
    ReservedValueQuery,
    StackingAnalyst,
    de_interleave,
    interleave,
)
from .base import Analyst, AnalystState, FixedQueryMap, ThresholdQueryMap
from .bellman import BellmanAnalyst, CellQuery, bellman_step, reward_estimate, rewards_from_answer
from .gradient import (
    ConstantSchedule,
    ExponentialSchedule,
    GradientQuery,
    LogisticLoss,
    PowerSchedule,
    QuadraticLoss,
    TypeAGradientAnalyst,
    TypeBGradientAnalyst,
    decode_gradient,
    encode_gradient,
    eta_for_contraction,
    gd_contraction_bound,
    gd_step_a,
    gd_step_b,
    lambda_min,
    loss_from_spec,
    schedule_from_spec,
)
from .linear import LinearAnalyst, StableRNNAnalyst, random_linear_analyst
from .verify import verify_class

__all__ = [
    "Analyst",
    "AnalystState",
    "FixedQueryMap",
    "ThresholdQueryMap",
    "LinearAnalyst",
    "StableRNNAnalyst",
    "random_linear_analyst",
    "BellmanAnalyst",
    "CellQuery",
    "bellman_step",
    "reward_estimate",
    "rewards_from_answer",
    "PowerSchedule",
    "ExponentialSchedule",
    "ConstantSchedule",
    "schedule_from_spec",
    "QuadraticLoss",
    "LogisticLoss",
    "loss_from_spec",
    "GradientQuery",
    "encode_gradient",
    "decode_gradient",
    "gd_step_a",
    "gd_step_b",
    "gd_contraction_bound",
    "eta_for_contraction",
    "lambda_min",
    "TypeAGradientAnalyst",
    "TypeBGradientAnalyst",
    "PrecisionExhausted",
    "interleave",
    "de_interleave",
    "InterleavingAnalyst",
    "ReservedValueQuery",
    "ReservedValueAdversary",
    "StackingAnalyst",
    "verify_class",
]
