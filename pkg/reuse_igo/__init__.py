"""
Information-geometric optimizers with sample reuse.

PBIL / compact GA on bit strings and rank-mu CMA-ES variants on R^d whose
natural-gradient estimates reuse the last K generations through importance
sampling against the mixture of their search distributions.
"""

from .algorithms import CmaState, PbilState, StepReport, Variant, cma_step, pbil_step
from .harness import ConfigError, ExperimentConfig, run_experiment, run_trial

__all__ = [
    "CmaState",
    "ConfigError",
    "ExperimentConfig",
    "PbilState",
    "StepReport",
    "Variant",
    "cma_step",
    "pbil_step",
    "run_experiment",
    "run_trial",
]
