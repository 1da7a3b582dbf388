import pytest

from lifetime_ruin import ConstantConsumption, MarketParams, Regime, solve, solve_riccati

BASE = MarketParams(r=0.02, mu=0.06, sigma=0.2, lam=0.04, b=0.04)


@pytest.fixture(scope="session")
def base():
    return BASE


@pytest.fixture(scope="session")
def unit_consumption():
    return ConstantConsumption(1.0)


@pytest.fixture(scope="session")
def riccati():
    return solve_riccati(BASE, 1.0)


@pytest.fixture(scope="session")
def solutions(riccati):
    return {
        Regime.UNCONSTRAINED: solve(BASE, 1.0, Regime.UNCONSTRAINED),
        Regime.NO_BORROW: solve(BASE, 1.0, Regime.NO_BORROW, riccati),
        Regime.BORROW: solve(BASE, 1.0, Regime.BORROW, riccati),
    }
