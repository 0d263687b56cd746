"""Scale-function evaluators for the supported risk-process models.

A ``ScaleSet`` bundles, for a fixed (model, q), the increasing function
``w`` whose Laplace transform is ``1 / (psi(theta) - q)``, its right
derivative, the integrals ``z = 1 + q * int(w)`` and ``zbar = int(z)``,
and the derived exit/passage functionals built from them.

Closed forms per model:

* ``BrownianDrift``: two-exponential form with rates given by the two real
  roots of ``psi(theta) = q``.
* ``ExpJumpCL``: partial-fraction expansion of the rational transform
  ``1/(psi(theta) - q)``; certified against the defining Laplace identity
  by :meth:`ScaleSet.laplace_identity_check`.
* ``FixedJumpCL`` (q = 0 only): lattice series.  Published statements of
  this series disagree on whether the summation starts at 0 or 1; the
  n=1 variant vanishes on ``[0, jump)`` and fails the Laplace-transform
  certification, so n=0 is the default.  The start index is kept as a
  constructor knob so the certification tooling can exhibit the failure.
"""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np
from scipy.integrate import quad

from .errors import DomainError, UnsupportedModelError
from .models import (
    BrownianDrift,
    ExpJumpCL,
    FixedJumpCL,
    LevyModel,
    laplace_exponent,
    phi_q,
    psi_prime_at_zero,
)

__all__ = ["ScaleSet"]


def _maybe_scalar(x_in, arr):
    return float(arr) if np.isscalar(x_in) or np.ndim(x_in) == 0 else arr


class ScaleSet:
    """Evaluators for w, w', z, zbar and derived quantities at fixed (model, q).

    Immutable after construction; every evaluator is a pure function, so
    instances may be shared freely across threads.
    """

    def __init__(self, model: LevyModel, q: float, *,
                 lattice_span: float | None = None,
                 fixed_sum_start: int = 0):
        self.model = model
        self.q = float(q)
        if isinstance(model, FixedJumpCL):
            if self.q != 0.0:
                raise UnsupportedModelError(
                    "FixedJumpCL supports only q = 0 (no closed q-scale form "
                    f"is available); got q = {q}"
                )
            if fixed_sum_start not in (0, 1):
                raise DomainError(f"fixed_sum_start must be 0 or 1, got {fixed_sum_start}")
            self.phi_q_cached = 0.0
            span = 50.0 * model.jump if lattice_span is None else float(lattice_span)
            n_pts = int(span / model.jump)
            self.nonsmooth_points: tuple[float, ...] = tuple(
                model.jump * k for k in range(1, n_pts + 1)
            )
            self.working_domain = span
        else:
            if not self.q > 0:
                raise DomainError(f"q must be positive, got {q}")
            self.phi_q_cached = phi_q(model, self.q)
            self.nonsmooth_points = ()
            self.working_domain = math.inf
        self.fixed_sum_start = fixed_sum_start
        self._init_constants()

    # -- construction helpers -------------------------------------------------

    def _init_constants(self):
        m = self.model
        if isinstance(m, BrownianDrift):
            s2 = m.sigma**2
            self._delta = math.sqrt(m.mu**2 + 2.0 * self.q * s2) / s2
            self._wdrift = m.mu / s2
            # rate_pos = phi_q > 0 and -rate_neg < 0 are the two real roots
            # of psi(theta) = q; w is their exponential difference.
            self._alpha = self._wdrift + self._delta
            self._beta = self._wdrift - self._delta
            self._s2 = s2
        elif isinstance(m, ExpJumpCL):
            # psi(theta) - q = 0  <=>  beta*th^2 + (beta*eta - lam - q)*th - q*eta = 0
            b, lam, eta, q = m.beta, m.lam, m.eta, self.q
            disc = (b * eta - lam - q) ** 2 + 4.0 * b * q * eta
            sq = math.sqrt(disc)
            self._rho_pos = (-(b * eta - lam - q) + sq) / (2.0 * b)
            self._rho_neg = (-(b * eta - lam - q) - sq) / (2.0 * b)
            self._a_pos = (eta + self._rho_pos) / (b * (self._rho_pos - self._rho_neg))
            self._a_neg = (eta + self._rho_neg) / (b * (self._rho_neg - self._rho_pos))

    def is_nonsmooth(self, x: float, tol: float = 1e-9) -> bool:
        """True when x sits (within tol) on a lattice point where w' jumps."""
        if not self.nonsmooth_points:
            return False
        jump = self.model.jump  # type: ignore[union-attr]
        k = round(x / jump)
        return k >= 1 and abs(x - k * jump) <= tol

    # -- core evaluators -------------------------------------------------------

    def w(self, x):
        """Scale function w(x); identically 0 for x < 0."""
        m = self.model
        xs = np.asarray(x, dtype=float)
        if isinstance(m, BrownianDrift):
            out = np.where(
                xs < 0.0,
                0.0,
                (np.exp(-self._beta * xs) - np.exp(-self._alpha * xs))
                / (self._s2 * self._delta),
            )
        elif isinstance(m, ExpJumpCL):
            out = np.where(
                xs < 0.0,
                0.0,
                self._a_pos * np.exp(self._rho_pos * xs)
                + self._a_neg * np.exp(self._rho_neg * xs),
            )
        else:
            out = np.vectorize(self._w_fixed, otypes=[float])(xs)
        return _maybe_scalar(x, out)

    def w_prime(self, x):
        """Right derivative of w at x > 0 (the right limit at lattice points)."""
        xs = np.asarray(x, dtype=float)
        if np.any(xs <= 0.0):
            raise DomainError("w_prime requires x > 0")
        m = self.model
        if isinstance(m, BrownianDrift):
            out = (
                -self._beta * np.exp(-self._beta * xs)
                + self._alpha * np.exp(-self._alpha * xs)
            ) / (self._s2 * self._delta)
        elif isinstance(m, ExpJumpCL):
            out = self._a_pos * self._rho_pos * np.exp(
                self._rho_pos * xs
            ) + self._a_neg * self._rho_neg * np.exp(self._rho_neg * xs)
        else:
            out = np.vectorize(self._w_fixed_prime, otypes=[float])(xs)
        return _maybe_scalar(x, out)

    def wbar(self, x):
        """Antiderivative of w on [0, x] (0 for x <= 0)."""
        m = self.model
        xs = np.asarray(x, dtype=float)
        if isinstance(m, BrownianDrift):
            out = np.where(xs < 0.0, 0.0, (self._z_brownian(xs) - 1.0) / self.q)
        elif isinstance(m, ExpJumpCL):
            out = np.where(
                xs < 0.0,
                0.0,
                self._a_pos * (np.exp(self._rho_pos * xs) - 1.0) / self._rho_pos
                + self._a_neg * (np.exp(self._rho_neg * xs) - 1.0) / self._rho_neg,
            )
        else:
            out = np.vectorize(self._wbar_fixed, otypes=[float])(xs)
        return _maybe_scalar(x, out)

    def z(self, x):
        """z(x) = 1 + q * wbar(x); extended to 1 for x < 0."""
        m = self.model
        xs = np.asarray(x, dtype=float)
        if isinstance(m, BrownianDrift):
            out = np.where(xs < 0.0, 1.0, self._z_brownian(xs))
        elif isinstance(m, ExpJumpCL):
            out = np.where(xs < 0.0, 1.0, 1.0 + self.q * np.asarray(self.wbar(xs)))
        else:
            out = np.ones_like(xs)  # q = 0
        return _maybe_scalar(x, out)

    def zbar(self, x):
        """zbar(x) = integral of z on [0, x]; extended linearly (= x) for x < 0."""
        m = self.model
        xs = np.asarray(x, dtype=float)
        if isinstance(m, BrownianDrift):
            body = -m.mu / self.q + self._s2 / (4.0 * self.q * self._delta) * (
                self._alpha**2 * np.exp(-self._beta * xs)
                - self._beta**2 * np.exp(-self._alpha * xs)
            )
            out = np.where(xs < 0.0, xs, body)
        elif isinstance(m, ExpJumpCL):
            body = xs + self.q * (
                self._a_pos
                * ((np.exp(self._rho_pos * xs) - 1.0) / self._rho_pos**2 - xs / self._rho_pos)
                + self._a_neg
                * ((np.exp(self._rho_neg * xs) - 1.0) / self._rho_neg**2 - xs / self._rho_neg)
            )
            out = np.where(xs < 0.0, xs, body)
        else:
            out = xs.copy() if xs.ndim else xs  # q = 0: z == 1 everywhere
        return _maybe_scalar(x, out)

    def _z_brownian(self, xs):
        return (
            self._alpha * np.exp(-self._beta * xs) - self._beta * np.exp(-self._alpha * xs)
        ) / (2.0 * self._delta)

    # -- fixed-jump lattice series ---------------------------------------------

    def _fixed_terms(self, x: float) -> Iterable[float]:
        m = self.model
        lam_b = m.lam / m.beta
        n_hi = int(math.floor(x / m.jump + 1e-12))
        for n in range(self.fixed_sum_start, n_hi + 1):
            u = x - m.jump * n  # >= 0 on the summation range
            if n == 0:
                yield math.exp(lam_b * u)
            elif u <= 0.0:
                yield 0.0
            else:
                mag = math.exp(lam_b * u + n * math.log(lam_b * u) - math.lgamma(n + 1))
                yield -mag if n % 2 else mag

    def _w_fixed(self, x: float) -> float:
        if x < 0.0:
            return 0.0
        return sum(self._fixed_terms(x)) / self.model.beta

    def _w_fixed_prime(self, x: float) -> float:
        m = self.model
        lam_b = m.lam / m.beta
        total = 0.0
        n_hi = int(math.floor(x / m.jump + 1e-12))
        for n in range(self.fixed_sum_start, n_hi + 1):
            u = x - m.jump * n
            if n == 0:
                total += lam_b * math.exp(lam_b * u)
                continue
            sign = -1.0 if n % 2 else 1.0
            if u <= 0.0:
                # term entering at a lattice point: only n = 1 contributes to
                # the right-limit derivative (mag*n/u -> lam_b as u -> 0+)
                if n == 1:
                    total += sign * lam_b
                continue
            mag = math.exp(lam_b * u + n * math.log(lam_b * u) - math.lgamma(n + 1))
            total += sign * mag * (lam_b + n / u)
        return total / m.beta

    def _wbar_fixed(self, x: float) -> float:
        if x <= 0.0:
            return 0.0
        pieces = [0.0] + [p for p in self.nonsmooth_points if p < x] + [x]
        total = 0.0
        for a, b in zip(pieces[:-1], pieces[1:]):
            val, _ = quad(self._w_fixed, a, b, epsabs=1e-12, epsrel=1e-12, limit=200)
            total += val
        return total

    # -- derived functionals -----------------------------------------------

    def exit_time_laplace(self, x, b) -> float:
        """E_x[exp(-q T_b+)] for the process reflected at 0: z(x)/z(b)."""
        if np.any(np.asarray(x) < 0) or np.any(np.asarray(x) > np.asarray(b)):
            raise DomainError(f"need 0 <= x <= b, got x={x}, b={b}")
        return self.z(x) / self.z(b)

    def reflected_passage_laplace(self, z2):
        """Laplace transform of the passage time of the sup-reflected process.

        Equals ``z(z2) - q * w(z2)^2 / w'(z2)``; lies in (0, 1] and decreases
        in z2.  At lattice points the right derivative of w is used.  For the
        Brownian model the difference is evaluated through an algebraically
        identical quotient that avoids catastrophic cancellation at large z2.
        """
        if np.any(np.asarray(z2) <= 0.0):
            raise DomainError("reflected_passage_laplace requires z2 > 0")
        if isinstance(self.model, BrownianDrift):
            xs = np.asarray(z2, dtype=float)
            al, be, delta = self._alpha, self._beta, self._delta
            out = 2.0 * delta * np.exp(-al * xs) / (-be + al * np.exp(-(al - be) * xs))
            return _maybe_scalar(z2, out)
        return self.z(z2) - self.q * self.w(z2) ** 2 / self.w_prime(z2)

    def h_func(self, x):
        """Alias of :meth:`reflected_passage_laplace`, used in root searches."""
        return self.reflected_passage_laplace(x)

    def g_func(self, phi: float, x):
        """phi*q*w(x)^2 + (1 - phi*z(x)) * w'(x); nonnegativity beyond the
        optimal trigger certifies the barrier value function's convexity."""
        return phi * self.q * self.w(x) ** 2 + (1.0 - phi * self.z(x)) * self.w_prime(x)

    # -- certification --------------------------------------------------------

    def laplace_identity_check(self, theta: float) -> float:
        """Absolute residual of the defining transform identity at theta.

        Integrates ``exp(-theta x) w(x)`` by adaptive quadrature up to a
        truncation point whose analytic tail bound is below 1e-10 of the
        target value ``1/(psi(theta) - q)``.
        """
        if theta <= self.phi_q_cached:
            raise DomainError(
                f"transform diverges: need theta > {self.phi_q_cached}, got {theta}"
            )
        target = 1.0 / (laplace_exponent(self.model, theta) - self.q)
        growth = self._tail_coefficient()
        gap = theta - self.phi_q_cached
        x_max = max(10.0, math.log(growth / (gap * 1e-10 * abs(target))) / gap)
        pts = [p for p in self.nonsmooth_points if p < x_max]
        integrand = lambda s: math.exp(-theta * s) * self._w_scalar(s)
        val, _ = quad(
            integrand, 0.0, x_max,
            epsabs=1e-13, epsrel=1e-13, limit=800,
            points=pts or None,
        )
        return abs(val - target)

    def _w_scalar(self, x: float) -> float:
        m = self.model
        if isinstance(m, FixedJumpCL):
            return self._w_fixed(x)
        return float(self.w(x))

    def _tail_coefficient(self) -> float:
        # constant C with w(x) <= C * exp(phi_q * x) for large x
        m = self.model
        if isinstance(m, BrownianDrift):
            return 1.0 / (self._s2 * self._delta)
        if isinstance(m, ExpJumpCL):
            return abs(self._a_pos) + abs(self._a_neg)
        return 2.0 / psi_prime_at_zero(m) + 1.0
