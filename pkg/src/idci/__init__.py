"""Optimal impulse dividend and capital injection strategies for
spectrally negative Levy risk processes.

The package evaluates scale functions for the supported models, maximizes
the two-parameter payout surface to find the optimal (z1, z2) strategy,
assembles the associated value functions, verifies the variational
optimality conditions numerically, and cross-validates everything against
a path simulation of the controlled reserve.
"""

from .errors import (
    ConfigError,
    ConsistencyError,
    ConvergenceError,
    DomainError,
    IdciError,
    UnsupportedModelError,
)
from .models import (
    BrownianDrift,
    Costs,
    ExpJumpCL,
    FixedJumpCL,
    LevyModel,
    laplace_exponent,
    phi_q,
    psi_prime_at_zero,
)
from .scale import ScaleSet

__version__ = "0.1.0"

__all__ = [
    "BrownianDrift",
    "FixedJumpCL",
    "ExpJumpCL",
    "LevyModel",
    "Costs",
    "ScaleSet",
    "laplace_exponent",
    "psi_prime_at_zero",
    "phi_q",
    "IdciError",
    "DomainError",
    "UnsupportedModelError",
    "ConvergenceError",
    "ConsistencyError",
    "ConfigError",
    "__version__",
]
