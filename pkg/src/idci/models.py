"""Risk-process models and their analytic primitives.

Three spectrally negative models are supported:

* ``BrownianDrift`` -- arithmetic Brownian motion with drift,
* ``FixedJumpCL`` -- compound Poisson premiums-minus-claims with a
  deterministic claim size,
* ``ExpJumpCL`` -- compound Poisson with exponentially distributed claims.

Each exposes its Laplace exponent ``psi``, the right derivative
``psi'(0+)``, and the inverse ``phi_q`` (largest root of ``psi(theta) = q``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

from .errors import ConvergenceError, DomainError

__all__ = [
    "BrownianDrift",
    "FixedJumpCL",
    "ExpJumpCL",
    "LevyModel",
    "Costs",
    "laplace_exponent",
    "psi_prime_at_zero",
    "phi_q",
]

_RESIDUAL_TOL = 1e-12


@dataclass(frozen=True)
class BrownianDrift:
    """Drifted Brownian reserve: drift ``mu`` per unit time, volatility ``sigma``."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        if not math.isfinite(self.mu):
            raise DomainError(f"mu must be finite, got {self.mu}")


@dataclass(frozen=True)
class FixedJumpCL:
    """Cramer-Lundberg reserve with deterministic claim size ``jump``.

    Premium rate ``beta``, Poisson claim rate ``lam``.  The net profit
    condition ``beta - lam * jump > 0`` is required so the process drifts
    to infinity.
    """

    beta: float
    lam: float
    jump: float

    def __post_init__(self):
        if not self.beta > 0:
            raise DomainError(f"beta must be positive, got {self.beta}")
        if not self.lam > 0:
            raise DomainError(f"lam must be positive, got {self.lam}")
        if not self.jump > 0:
            raise DomainError(f"jump must be positive, got {self.jump}")
        if not self.beta - self.lam * self.jump > 0:
            raise DomainError(
                "net profit condition violated: need beta - lam*jump > 0, "
                f"got {self.beta - self.lam * self.jump}"
            )


@dataclass(frozen=True)
class ExpJumpCL:
    """Cramer-Lundberg reserve with Exp(eta) claim sizes."""

    beta: float
    lam: float
    eta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise DomainError(f"beta must be positive, got {self.beta}")
        if not self.lam > 0:
            raise DomainError(f"lam must be positive, got {self.lam}")
        if not self.eta > 0:
            raise DomainError(f"eta must be positive, got {self.eta}")


LevyModel = Union[BrownianDrift, FixedJumpCL, ExpJumpCL]


@dataclass(frozen=True)
class Costs:
    """Control-problem constants.

    ``q``   discount rate (> 0),
    ``c``   fixed transaction cost per dividend lump (> 0),
    ``phi`` cost per unit of injected capital (> 1).
    """

    q: float
    c: float
    phi: float

    def __post_init__(self):
        if not self.q > 0:
            raise DomainError(f"q must be positive, got {self.q}")
        if not self.c > 0:
            raise DomainError(f"c must be positive, got {self.c}")
        if not self.phi > 1:
            raise DomainError(f"phi must exceed 1, got {self.phi}")


def laplace_exponent(model: LevyModel, theta: float) -> float:
    """Laplace exponent ``psi(theta) = log E[exp(theta * X(1))]`` for theta >= 0."""
    if theta < 0:
        raise DomainError(f"theta must be nonnegative, got {theta}")
    if isinstance(model, BrownianDrift):
        return model.mu * theta + 0.5 * model.sigma**2 * theta**2
    if isinstance(model, FixedJumpCL):
        return model.beta * theta - model.lam * (1.0 - math.exp(-theta * model.jump))
    if isinstance(model, ExpJumpCL):
        return model.beta * theta - model.lam * theta / (model.eta + theta)
    raise TypeError(f"unknown model type {type(model).__name__}")


def psi_prime_at_zero(model: LevyModel) -> float:
    """Right derivative of the Laplace exponent at zero (mean drift of X)."""
    if isinstance(model, BrownianDrift):
        return model.mu
    if isinstance(model, FixedJumpCL):
        return model.beta - model.lam * model.jump
    if isinstance(model, ExpJumpCL):
        return model.beta - model.lam / model.eta
    raise TypeError(f"unknown model type {type(model).__name__}")


def phi_q(model: LevyModel, q: float) -> float:
    """Largest solution of ``psi(theta) = q`` for q > 0.

    Brownian models use the closed-form root; the jump models bracket the
    root by doubling and then bisect, finishing with Newton steps.  The
    returned root satisfies ``|psi(root) - q| <= 1e-12``.
    """
    if not q > 0:
        raise DomainError(f"q must be positive, got {q}")
    if isinstance(model, BrownianDrift):
        s2 = model.sigma**2
        return (-model.mu + math.sqrt(model.mu**2 + 2.0 * q * s2)) / s2
    return _phi_q_bracketed(model, q)


def _phi_q_bracketed(model: LevyModel, q: float) -> float:
    # psi is convex with psi(0) = 0, so psi(theta) - q has exactly one root
    # beyond the point where psi turns positive; double until bracketed.
    lo = 0.0
    hi = max(1.0, q)
    for _ in range(200):
        if laplace_exponent(model, hi) > q:
            break
        lo = hi
        hi *= 2.0
    else:
        raise ConvergenceError(f"could not bracket phi_q: psi({hi}) <= {q}")

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if laplace_exponent(model, mid) > q:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-14 * max(1.0, hi):
            break

    root = 0.5 * (lo + hi)
    # Newton polish; convexity gives quadratic convergence from here.
    for _ in range(50):
        res = laplace_exponent(model, root) - q
        if abs(res) <= _RESIDUAL_TOL:
            return root
        slope = _psi_prime(model, root)
        if slope <= 0:
            break
        root -= res / slope
    res = laplace_exponent(model, root) - q
    if abs(res) > _RESIDUAL_TOL:
        raise ConvergenceError(
            f"phi_q residual {res:.3e} above tolerance; bracket was [{lo}, {hi}]"
        )
    return root


def _psi_prime(model: LevyModel, theta: float) -> float:
    if isinstance(model, BrownianDrift):
        return model.mu + model.sigma**2 * theta
    if isinstance(model, FixedJumpCL):
        return model.beta - model.lam * model.jump * math.exp(-theta * model.jump)
    if isinstance(model, ExpJumpCL):
        return model.beta - model.lam * model.eta / (model.eta + theta) ** 2
    raise TypeError(f"unknown model type {type(model).__name__}")
