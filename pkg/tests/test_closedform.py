import math

import numpy as np
import pytest

from lifetime_ruin.closedform import (
    crra_equivalent,
    exponent_ab,
    exponent_ar,
    exponent_k,
    pistar_unconstrained,
    proportional_hjb_residual,
    psi_unconstrained,
    solve_proportional,
)
from lifetime_ruin.errors import DomainError
from lifetime_ruin.model import MarketParams, Regime, derive_constants

from oracles import best_fraction, power_exponents, power_generator, random_power_draw


@pytest.fixture(scope="module")
def k4(base):
    return derive_constants(base, 1.0)


def test_psi_endpoints(k4):
    assert psi_unconstrained(0.0, k4) == 1.0
    assert psi_unconstrained(50.0, k4) == 0.0
    assert psi_unconstrained(70.0, k4) == 0.0


def test_psi_midpoint(k4):
    assert psi_unconstrained(25.0, k4) == pytest.approx(0.5 ** (2 + math.sqrt(2)), rel=1e-14)


def test_psi_rejects_negative(k4):
    with pytest.raises(DomainError):
        psi_unconstrained(-1.0, k4)


def test_pistar_values(k4):
    assert pistar_unconstrained(50.0, k4) == 0.0
    assert pistar_unconstrained(0.0, k4) == pytest.approx((math.sqrt(2) - 1) * 50, rel=1e-13)
    assert pistar_unconstrained(k4.w_l, k4) == pytest.approx(k4.w_l, rel=1e-13)
    with pytest.raises(DomainError):
        pistar_unconstrained(51.0, k4)


def test_pistar_decreasing(k4):
    w = np.linspace(0, 50, 101)
    assert np.all(np.diff(pistar_unconstrained(w, k4)) < 0)


def test_unconstrained_solves_its_ode(k4, base):
    # lam psi = (r w - c) psi' - m psi'^2 / psi''
    w = np.linspace(0.5, 45, 50)
    d, s = k4.d, k4.safe_level
    psi = (1 - w / s) ** d
    dpsi = -d / s * (1 - w / s) ** (d - 1)
    d2psi = d * (d - 1) / s**2 * (1 - w / s) ** (d - 2)
    res = (base.r * w - 1.0) * dpsi - k4.m * dpsi**2 / d2psi - base.lam * psi
    assert np.max(np.abs(res / psi)) < 1e-12


def test_ar_positive_and_roots():
    rng = np.random.default_rng(3)
    for _ in range(50):
        d = random_power_draw(rng)
        params = MarketParams(d["r"], d["mu"], d["sigma"], d["lam"], b=d["b"])
        a_r, k, a_b = power_exponents(**d)
        assert exponent_ar(params, d["p"]) == pytest.approx(a_r, rel=1e-10)
        assert exponent_k(params, d["p"]) == pytest.approx(k, rel=1e-10)
        assert exponent_ab(params, d["p"]) == pytest.approx(a_b, rel=1e-10)
        assert exponent_ar(params, d["p"]) > 0


def test_ar_small_lambda_limit():
    params = MarketParams(0.02, 0.06, 0.2, 1e-12)
    for p in (0.03, 0.05, 0.2):
        m = 0.02
        expected = max(0.0, (0.02 - p + m) / (p - 0.02))
        assert exponent_ar(params, p) == pytest.approx(expected, abs=1e-8)


def test_minus_ar_is_d_with_shifted_rate(base):
    p = 0.05
    a = exponent_ar(base, p)
    rp = base.r - p
    m = 0.02
    # d solves rate d^2 - (rate + lam + m) d + lam = 0 with rate = r - p
    assert rp * a**2 + (rp + base.lam + m) * a + base.lam == pytest.approx(0.0, abs=1e-15)


def test_k_special_cases():
    # mu - p - sigma^2/2 = 0
    params = MarketParams(0.02, 0.07, 0.2, 0.04)
    assert exponent_k(params, 0.05) == pytest.approx(math.sqrt(2 * 0.04 * 0.04) / 0.04, rel=1e-12)
    tiny = MarketParams(0.02, 0.1, 0.2, 1e-14)
    assert exponent_k(tiny, 0.05) == pytest.approx(2 * (0.1 - 0.05 - 0.02) / 0.04, rel=1e-9)


def test_k_residual(base):
    for p in (0.03, 0.05, 0.09):
        k = exponent_k(base, p)
        assert base.lam - k * (p - base.mu + 0.5 * base.sigma**2 * (k + 1)) == pytest.approx(0.0, abs=1e-12)


def test_ab_properties():
    params = MarketParams(0.02, 0.06, 0.2, 0.04, b=0.02)
    assert exponent_ab(params, 0.05) == exponent_ar(params, 0.05)
    for b in (0.025, 0.04, 0.049):
        q = params.replace(b=b)
        a = exponent_ab(q, 0.05)
        m_b = 0.5 * ((0.06 - b) / 0.2) ** 2
        assert q.lam - (a * (0.05 - b) - a * m_b / (a + 1)) == pytest.approx(0.0, abs=1e-12)
    # leverage fraction collapses as b -> min(mu, p)
    fracs = [(0.06 - b) / 0.04 / (exponent_ab(params.replace(b=b), 0.05) + 1) for b in (0.04, 0.049, 0.04999, 0.0499999)]
    assert all(x > y for x, y in zip(fracs, fracs[1:]))
    assert fracs[-1] < 1e-3


def test_case_examples():
    # small excess return: untruncated Merton fraction
    lo = MarketParams(0.02, 0.03, 0.3, 0.04)
    sol = solve_proportional(lo, 0.05, 1.0, Regime.NO_BORROW)
    assert sol.case == "a_r"
    assert sol.investment_fraction == pytest.approx(0.01 / 0.09 / (exponent_ar(lo, 0.05) + 1))
    assert sol.investment_fraction < 1
    # large excess return: everything in the risky asset
    hi = MarketParams(0.02, 0.12, 0.15, 0.04)
    sol = solve_proportional(hi, 0.3, 1.0, Regime.NO_BORROW)
    assert (sol.case, sol.investment_fraction) == ("k", 1.0)
    assert sol.exponent == exponent_k(hi, 0.3)
    # expensive borrowing keeps the investor at exactly her wealth
    mid = hi.replace(b=0.11)
    sol = solve_proportional(mid, 0.3, 1.0, Regime.BORROW)
    assert (sol.case, sol.investment_fraction) == ("k", 1.0)
    cheap = hi.replace(b=0.021)
    sol = solve_proportional(cheap, 0.3, 1.0, Regime.BORROW)
    assert sol.case == "a_b" and sol.investment_fraction > 1


@pytest.mark.parametrize("regime", list(Regime))
def test_psi_is_one_at_w0(regime):
    params = MarketParams(0.02, 0.06, 0.2, 0.04, b=0.03)
    sol = solve_proportional(params, 0.05, 2.0, regime)
    assert sol.psi(2.0) == 1.0
    assert sol.psi(1.0) == 1.0
    assert sol.psi(4.0) == pytest.approx(2.0 ** -sol.exponent)


def test_crra():
    assert crra_equivalent(1.0, 0.04, 0.05).risk_aversion == 2.0
    eq = crra_equivalent(0.7, 0.04, 0.05)
    assert eq.risk_aversion == pytest.approx(1.7)
    assert eq.discount == pytest.approx(0.09)
    with pytest.raises(DomainError):
        crra_equivalent(0.0, 0.04, 0.05)


@pytest.mark.parametrize("seed", range(5))
def test_random_draws_minimise_generator(seed):
    rng = np.random.default_rng(100 + seed)
    for _ in range(40):
        d = random_power_draw(rng)
        params = MarketParams(d["r"], d["mu"], d["sigma"], d["lam"], b=d["b"])
        for regime in (Regime.NO_BORROW, Regime.BORROW):
            sol = solve_proportional(params, d["p"], 1.0, regime)
            b = d["b"] if regime is Regime.BORROW else d["r"]
            val, frac = best_fraction(sol.exponent, d["r"], b, d["mu"], d["sigma"], d["lam"], d["p"], regime is Regime.BORROW)
            assert abs(val) / d["lam"] < 1e-10
            assert sol.investment_fraction == pytest.approx(frac, abs=1e-6)
            res = proportional_hjb_residual(sol, params, d["p"], np.array([1.5, 3.0, 10.0]))
            assert np.max(np.abs(res)) < 1e-10


def test_exponent_non_increasing_in_borrow_rate():
    # dearer borrowing can only raise the ruin probability
    params = MarketParams(r=0.02, mu=0.08, sigma=0.2, lam=0.04)
    rates = np.linspace(0.02, 0.0799, 60)
    for p in (0.09, 0.2, 0.3):
        sols = [solve_proportional(params.replace(b=b), p, 1.0, Regime.BORROW) for b in rates]
        a = np.array([s.exponent for s in sols])
        assert np.all(np.diff(a) <= 1e-12)
        if p > 0.1:
            assert sols[0].case == "a_b" and a[-1] < a[0]
