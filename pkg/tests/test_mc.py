from __future__ import annotations

import math

import numba
import numpy as np
import pytest

from idci import BrownianDrift, Costs, DomainError, ExpJumpCL, FixedJumpCL, ScaleSet
from idci.mc import McEstimate, SimConfig, estimate_exit_laplace, estimate_value, simulate_path
from idci.optimize import Strategy, optimize, value_function


@pytest.fixture(scope="module")
def strategy(bm_set, costs):
    s = optimize(bm_set, costs).strategy
    return Strategy(s.z1, s.z2)


def reference_path(model, costs, strategy, x0, dt, horizon, rng):
    """Literal per-step clamp scheme, kept independent of the production
    kernel; returns totals plus the full event trace for invariant checks."""
    z1, z2, q, c = strategy.z1, strategy.z2, costs.q, costs.c
    t, u = 0.0, x0
    div = inj = 0.0
    trace = []
    sq = model.sigma * math.sqrt(dt)
    while t < horizon:
        if u >= z2:
            div += math.exp(-q * t) * (u - z1 - c)
            trace.append(("dividend", t, u))
            u = z1
            continue
        u += model.mu * dt + sq * rng.standard_normal()
        t += dt
        if u < 0.0:
            inj += math.exp(-q * t) * (-u)
            trace.append(("injection", t, u))
            u = 0.0
    return div, inj, trace


class TestSimConfig:
    def test_validation(self):
        with pytest.raises(DomainError):
            SimConfig(dt=0.0)
        with pytest.raises(DomainError):
            SimConfig(horizon=-1.0)
        with pytest.raises(DomainError):
            SimConfig(n_paths=0)

    def test_block_cap_floors_at_dt(self):
        cfg = SimConfig(dt=0.01, block_time_max=0.001)
        assert cfg.block_time_max == cfg.dt


class TestDeterminism:
    def test_identical_config_identical_estimate(self, bm_model, costs, strategy):
        cfg = SimConfig(dt=1e-3, horizon=30.0, n_paths=500, seed=42)
        a = estimate_value(bm_model, costs, strategy, 1.0, cfg)
        b = estimate_value(bm_model, costs, strategy, 1.0, cfg)
        assert a == b

    def test_independent_of_thread_count(self, bm_model, costs, strategy):
        cfg = SimConfig(dt=1e-3, horizon=30.0, n_paths=400, seed=42)
        old = numba.get_num_threads()
        try:
            numba.set_num_threads(1)
            a = estimate_value(bm_model, costs, strategy, 1.0, cfg)
            numba.set_num_threads(2)
            b = estimate_value(bm_model, costs, strategy, 1.0, cfg)
        finally:
            numba.set_num_threads(old)
        assert a.mean == b.mean and a.stderr == b.stderr

    def test_single_path_matches_estimate_of_one(self, bm_model, costs, strategy):
        cfg = SimConfig(dt=1e-3, horizon=30.0, n_paths=1, seed=97)
        d, r = simulate_path(bm_model, costs, strategy, 1.0, cfg, 97)
        est = estimate_value(bm_model, costs, strategy, 1.0, cfg)
        assert est.dividends_mean == d and est.injections_mean == r


class TestPathSemantics:
    def test_reference_trace_invariants(self, bm_model, costs, strategy):
        rng = np.random.default_rng(5)
        div, inj, trace = reference_path(
            bm_model, costs, strategy, 2.5, 1e-3, 40.0, rng
        )
        assert div > 0.0
        kinds = {k for k, _, _ in trace}
        assert "dividend" in kinds
        for kind, t, level in trace:
            if kind == "dividend":
                assert level >= strategy.z2
            else:
                assert level < 0.0  # clamped back to zero afterwards

    def test_initial_reserve_at_trigger_pays_immediately(self, bm_model, costs, strategy):
        cfg = SimConfig(dt=1e-3, horizon=1e-3, n_paths=1, seed=1)
        x0 = strategy.z2
        d, _ = simulate_path(bm_model, costs, strategy, x0, cfg, 1)
        assert d >= x0 - strategy.z1 - costs.c - 1e-12

    def test_initial_reserve_above_trigger_pays_excess(self, bm_model, costs, strategy):
        cfg = SimConfig(dt=1e-3, horizon=1e-3, n_paths=1, seed=1)
        d, _ = simulate_path(bm_model, costs, strategy, 5.0, cfg, 1)
        assert d == pytest.approx(5.0 - strategy.z1 - costs.c, abs=1e-9)

    def test_deterministic_sawtooth(self, costs):
        # vanishing volatility: the controlled path is a drift sawtooth and
        # the discounted dividends form a geometric series
        model = BrownianDrift(mu=1.0, sigma=1e-8)
        strat = Strategy(0.5, 1.5)
        cfg = SimConfig(dt=1e-4, horizon=50.0, n_paths=1, seed=3)
        d, r = simulate_path(model, costs, strat, 1.0, cfg, 11)
        first_hit = (strat.z2 - 1.0) / model.mu
        cycle = (strat.z2 - strat.z1) / model.mu
        expected = sum(
            (strat.z2 - strat.z1 - costs.c) * math.exp(-costs.q * (first_hit + k * cycle))
            for k in range(int((50.0 - first_hit) / cycle) + 1)
        )
        assert d == pytest.approx(expected, rel=1e-4)
        assert r == 0.0

    def test_negative_reserve_rejected(self, bm_model, costs, strategy):
        with pytest.raises(DomainError):
            simulate_path(bm_model, costs, strategy, -1.0, SimConfig(), 1)


class TestEstimateValue:
    def test_component_identity_exact(self, bm_model, costs, strategy):
        cfg = SimConfig(dt=1e-3, horizon=30.0, n_paths=300, seed=8)
        est = estimate_value(bm_model, costs, strategy, 1.0, cfg)
        assert est.mean == est.dividends_mean - costs.phi * est.injections_mean

    def test_truncation_bound_recorded(self, bm_model, costs, strategy):
        cfg = SimConfig(dt=1e-3, horizon=30.0, n_paths=50, seed=8)
        est = estimate_value(bm_model, costs, strategy, 1.0, cfg)
        assert est.truncation_bound > 0.0
        assert "dt=0.001" in est.discretization_note

    def test_matches_analytic_value(self, bm_model, bm_set, costs, strategy):
        cfg = SimConfig(dt=1e-3, horizon=200.0, n_paths=20_000, seed=123)
        est = estimate_value(bm_model, costs, strategy, 1.0, cfg)
        truth = value_function(bm_set, costs, strategy, 1.0)
        assert abs(est.mean - truth.value) < 3.0 * est.stderr
        assert abs(est.dividends_mean - truth.dividends_part) < 3.0 * est.dividends_stderr
        assert abs(est.injections_mean - truth.injections_part) < 3.0 * est.injections_stderr

    def test_blocked_stepping_consistent_with_literal(self, bm_model, bm_set, costs, strategy):
        base = dict(dt=1e-3, horizon=60.0, n_paths=6000)
        blocked = estimate_value(
            bm_model, costs, strategy, 1.0, SimConfig(seed=55, block_time_max=0.05, **base)
        )
        literal = estimate_value(
            bm_model, costs, strategy, 1.0, SimConfig(seed=56, block_time_max=1e-3, **base)
        )
        gap = abs(blocked.mean - literal.mean)
        assert gap < 4.0 * math.hypot(blocked.stderr, literal.stderr)

    def test_reference_scheme_agrees_statistically(self, bm_model, bm_set, costs, strategy):
        # independent implementation, independent RNG, clamp discretization
        rng = np.random.default_rng(99)
        n = 300
        totals = np.empty(n)
        for i in range(n):
            d, r, _ = reference_path(bm_model, costs, strategy, 1.0, 1e-3, 100.0, rng)
            totals[i] = d - costs.phi * r
        ref_mean = totals.mean()
        ref_se = totals.std(ddof=1) / math.sqrt(n)
        est = estimate_value(
            bm_model, costs, strategy, 1.0,
            SimConfig(dt=1e-3, horizon=100.0, n_paths=4000, seed=7, bridge_correction=False,
                      block_time_max=1e-3),
        )
        assert abs(est.mean - ref_mean) < 4.0 * math.hypot(ref_se, est.stderr)

    def test_exp_jump_components_match_closed_forms(self, exp_model, exp_set, costs):
        strat_m = optimize(exp_set, costs).strategy
        strat = Strategy(strat_m.z1, strat_m.z2)
        cfg = SimConfig(horizon=300.0, n_paths=20_000, seed=77)
        est = estimate_value(exp_model, costs, strat, 1.0, cfg)
        truth = value_function(exp_set, costs, strat_m, 1.0)
        assert abs(est.mean - truth.value) < 3.0 * est.stderr
        assert abs(est.dividends_mean - truth.dividends_part) < 3.0 * est.dividends_stderr
        assert abs(est.injections_mean - truth.injections_part) < 3.0 * est.injections_stderr
        assert "event-driven" in est.discretization_note

    def test_fixed_jump_model_simulates(self, fixed_model, costs):
        # no closed q-scale form exists, but the controlled process is still
        # well defined; the estimate must at least carry a finite bound
        strat = Strategy(0.5, 2.0)
        cfg = SimConfig(horizon=100.0, n_paths=500, seed=13)
        est = estimate_value(fixed_model, costs, strat, 1.0, cfg)
        assert math.isfinite(est.mean)
        assert est.truncation_bound > 0.0

    @pytest.mark.slow
    def test_halving_dt_is_stable(self, bm_model, costs, strategy):
        base = dict(horizon=150.0, n_paths=20_000, seed=2024)
        coarse = estimate_value(bm_model, costs, strategy, 1.0, SimConfig(dt=1e-3, **base))
        fine = estimate_value(bm_model, costs, strategy, 1.0, SimConfig(dt=5e-4, **base))
        assert abs(coarse.mean - fine.mean) < 2.0 * math.hypot(coarse.stderr, fine.stderr)


class TestExitLaplace:
    def test_immediate_when_starting_at_barrier(self, bm_model, costs):
        cfg = SimConfig(dt=1e-3, horizon=10.0, n_paths=10, seed=4)
        est = estimate_exit_laplace(bm_model, costs.q, cfg, 2.0, 2.0)
        assert est.mean == 1.0 and est.stderr == 0.0

    def test_matches_scale_ratio(self, bm_model, bm_set, costs):
        cfg = SimConfig(dt=1e-3, horizon=400.0, n_paths=20_000, seed=31)
        est = estimate_exit_laplace(bm_model, costs.q, cfg, 1.0, 2.0)
        truth = bm_set.exit_time_laplace(1.0, 2.0)
        assert abs(est.mean - truth) < 3.0 * est.stderr

    def test_from_zero_matches_reciprocal(self, bm_model, bm_set, costs):
        cfg = SimConfig(dt=1e-3, horizon=400.0, n_paths=20_000, seed=37)
        est = estimate_exit_laplace(bm_model, costs.q, cfg, 0.0, 2.0)
        truth = 1.0 / bm_set.z(2.0)
        assert abs(est.mean - truth) < 3.0 * est.stderr

    def test_domain_checks(self, bm_model, costs):
        cfg = SimConfig()
        with pytest.raises(DomainError):
            estimate_exit_laplace(bm_model, costs.q, cfg, 3.0, 2.0)
        with pytest.raises(DomainError):
            estimate_exit_laplace(bm_model, 0.0, cfg, 1.0, 2.0)

    def test_exp_jump_exit(self, exp_model, exp_set, costs):
        cfg = SimConfig(horizon=400.0, n_paths=20_000, seed=41)
        est = estimate_exit_laplace(exp_model, costs.q, cfg, 1.0, 2.0)
        truth = exp_set.exit_time_laplace(1.0, 2.0)
        assert abs(est.mean - truth) < 3.0 * est.stderr
