"""Φ-DCA: forward/backward splitting under generalized convexity."""

from .core import (
    ConfigError,
    DomainError,
    DualPair,
    DualTriple,
    GFunction,
    InvalidArgumentError,
    IterationRecord,
    NumericalError,
    Oracle,
    Problem,
    Trace,
    UnboundedSubproblemError,
    eval_F,
)
from .couplings import make_coupling, phi_eval, phi_grad_x
from .forward import forward_step, forward_step_averaged
from .backward import backward_step, cubic_subproblem, prox_catalog_lookup

__all__ = [
    "ConfigError",
    "DomainError",
    "DualPair",
    "DualTriple",
    "GFunction",
    "InvalidArgumentError",
    "IterationRecord",
    "NumericalError",
    "Oracle",
    "Problem",
    "Trace",
    "UnboundedSubproblemError",
    "backward_step",
    "cubic_subproblem",
    "eval_F",
    "forward_step",
    "forward_step_averaged",
    "make_coupling",
    "phi_eval",
    "phi_grad_x",
    "prox_catalog_lookup",
]

__version__ = "0.1.0"
