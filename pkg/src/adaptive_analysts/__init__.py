"""Simulation toolkit for adaptive data analysts modelled as dynamical systems.

Analysts evolve a hidden state from the answers they receive and choose each
statistical query from that state. The package provides the analyst
families, the mechanisms answering them, privacy accounting, truncated-analyst
replays and an experiment harness.
"""

from . import analysts, core, distributions, mechanisms, privacy, queries, transcript
from . import harness, session, truncation
from .core import GridState, NormSpec, lp_distance, ones_norm, operator_norm, quantize
from .distributions import (
    BernoulliProduct,
    ClippedGaussian,
    Dataset,
    MdpDistribution,
    UniformBox,
    sample_dataset,
    true_mean,
)
from .mechanisms import (
    ClampedGaussianMechanism,
    EmpiricalMechanism,
    GaussianMechanism,
    RoundedEmpiricalMechanism,
    sigma_for,
)
from .privacy import DepthResult, DpParams
from .transcript import Round, Transcript

__version__ = "0.1.0"

__all__ = [
    "analysts",
    "core",
    "distributions",
    "mechanisms",
    "privacy",
    "queries",
    "transcript",
    "harness",
    "session",
    "truncation",
    "GridState",
    "NormSpec",
    "lp_distance",
    "ones_norm",
    "operator_norm",
    "quantize",
    "BernoulliProduct",
    "ClippedGaussian",
    "Dataset",
    "MdpDistribution",
    "UniformBox",
    "sample_dataset",
    "true_mean",
    "ClampedGaussianMechanism",
    "EmpiricalMechanism",
    "GaussianMechanism",
    "RoundedEmpiricalMechanism",
    "sigma_for",
    "DepthResult",
    "DpParams",
    "Round",
    "Transcript",
]
