from __future__ import annotations

import pytest

from idci import BrownianDrift, Costs, ExpJumpCL, FixedJumpCL, ScaleSet


@pytest.fixture(scope="session")
def bm_model() -> BrownianDrift:
    """Drifted Brownian reserve used throughout the worked example."""
    return BrownianDrift(mu=1.0, sigma=0.36)


@pytest.fixture(scope="session")
def costs() -> Costs:
    return Costs(q=0.05, c=0.1, phi=1.05)


@pytest.fixture(scope="session")
def bm_set(bm_model, costs) -> ScaleSet:
    return ScaleSet(bm_model, costs.q)


@pytest.fixture(scope="session")
def exp_model() -> ExpJumpCL:
    return ExpJumpCL(beta=2.0, lam=1.0, eta=1.0)


@pytest.fixture(scope="session")
def exp_set(exp_model, costs) -> ScaleSet:
    return ScaleSet(exp_model, costs.q)


@pytest.fixture(scope="session")
def fixed_model() -> FixedJumpCL:
    return FixedJumpCL(beta=2.0, lam=1.0, jump=1.0)


@pytest.fixture(scope="session")
def fixed_set(fixed_model) -> ScaleSet:
    return ScaleSet(fixed_model, 0.0)
