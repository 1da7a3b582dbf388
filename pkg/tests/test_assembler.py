import numpy as np
import pytest

from lifetime_ruin.assembler import compare_regimes, evaluate, limit_sweep, solve
from lifetime_ruin.closedform import psi_unconstrained
from lifetime_ruin.errors import DomainError, ParameterError, RuinError
from lifetime_ruin.model import MarketParams, Regime, derive_constants
from lifetime_ruin.riccati import solve_riccati

W_L = 14.644660940672624


def test_noborrow_regions(solutions):
    sol = solutions[Regime.NO_BORROW]
    assert [r.kind for r in sol.regions] == ["unit", "tail", "safe"]
    assert sol.w_l == pytest.approx(14.64, abs=5e-3)
    w = np.linspace(0, sol.w_l, 50, endpoint=False)
    assert np.array_equal(sol.pistar(w), w)
    assert np.all(sol.pistar(np.linspace(sol.w_l + 0.1, 49, 20)) < np.linspace(sol.w_l + 0.1, 49, 20))


def test_borrow_regions(solutions):
    sol = solutions[Regime.BORROW]
    assert [r.kind for r in sol.regions] == ["dual", "unit", "tail", "safe"]
    assert sol.w_b == pytest.approx(10.62, abs=5e-3)
    lev = np.linspace(0.1, sol.w_b - 0.05, 20)
    assert np.all(sol.evaluate(lev)[2] < 0)
    mid = np.linspace(10.63, 14.63, 20)
    assert np.all(sol.evaluate(mid)[2] == 0)


def test_unconstrained_is_closed_form(solutions, base):
    sol = solutions[Regime.UNCONSTRAINED]
    w = np.linspace(0, 60, 77)
    assert np.array_equal(sol.psi(w), psi_unconstrained(w, derive_constants(base, 1.0)))
    assert sol.riccati is None and sol.beta == 1.0


@pytest.mark.parametrize("regime", list(Regime))
def test_endpoints(solutions, regime):
    sol = solutions[regime]
    assert sol.psi(0.0) == pytest.approx(1.0, abs=1e-10)
    assert sol.psi(50.0) == 0.0
    assert sol.evaluate(60.0) == (0.0, 0.0, 60.0)


def test_negative_wealth_rejected(solutions):
    with pytest.raises(DomainError):
        evaluate(solutions[Regime.BORROW], -1.0)


def test_ordering(solutions):
    w = np.linspace(0, 50, 512)
    psi = solutions[Regime.UNCONSTRAINED].psi(w)
    psi_b = solutions[Regime.BORROW].psi(w)
    psi_0 = solutions[Regime.NO_BORROW].psi(w)
    assert np.all(psi <= psi_b + 1e-9) and np.all(psi_b <= psi_0 + 1e-9)
    p, pb, p0 = (s.psi(25.0) for s in (solutions[Regime.UNCONSTRAINED], solutions[Regime.BORROW], solutions[Regime.NO_BORROW]))
    assert p <= pb <= p0


def test_compare_regimes(base):
    cmp = compare_regimes(base, 1.0, np.linspace(0, 50, 101))
    assert cmp.ordering_violation() <= 1e-9
    assert cmp.rows()[0][1:] == pytest.approx((1.0, 1.0, 1.0), abs=1e-10)
    assert cmp.rows()[-1][1:] == (0.0, 0.0, 0.0)


def test_smooth_pasting(solutions):
    for sol, points in ((solutions[Regime.BORROW], ("w_b", "w_l")), (solutions[Regime.NO_BORROW], ("w_l",))):
        for name in points:
            w = getattr(sol, name)
            left = sol.dpsi(np.nextafter(w, 0))[0]
            right = sol.dpsi(w)[0]
            assert abs(left - right) / abs(right) < 1e-6
            # values meet as well
            assert sol.psi(np.nextafter(w, 0)) == pytest.approx(sol.psi(w), rel=1e-9)


def test_derivative_matches_differences(solutions):
    sol = solutions[Regime.BORROW]
    w = np.array([3.0, 12.0, 30.0])
    h = 1e-5
    fd = (sol.psi(w + h) - sol.psi(w - h)) / (2 * h)
    assert np.allclose(sol.dpsi(w), fd, rtol=1e-6)


def test_convexity_and_inflection(solutions):
    w = np.linspace(0, 50, 4001)
    d2b = np.diff(solutions[Regime.BORROW].psi(w), 2)
    assert np.all(d2b >= -1e-8)
    sol0 = solutions[Regime.NO_BORROW]
    d2 = np.diff(sol0.psi(w), 2)
    mids = w[1:-1]
    inside = mids < 49
    change = np.nonzero(np.diff(np.sign(d2[inside])))[0]
    assert len(change) == 1
    assert abs(mids[change[0]] - sol0.w_mu) < 0.05


def test_unit_region_value_from_dual(solutions):
    sol = solutions[Regime.BORROW]
    dual = sol.dual
    assert sol.psi(sol.w_b) == pytest.approx(dual.ht(dual.vb) - sol.w_b * dual.vb, rel=1e-12)


def test_tail_multiplier(solutions):
    for regime in (Regime.NO_BORROW, Regime.BORROW):
        sol = solutions[regime]
        assert sol.beta >= 1.0
        w = np.linspace(sol.w_l, 49.9, 10)
        assert np.allclose(sol.psi(w), sol.beta * (1 - w / 50.0) ** sol.d, rtol=1e-12)
    assert solutions[Regime.NO_BORROW].beta > solutions[Regime.BORROW].beta


def test_limit_b_to_r(base, riccati):
    q = base.replace(b=base.r + 1e-4)
    sol_b = solve(q, 1.0, Regime.BORROW, riccati)
    w = np.linspace(0, 50, 200)
    gap = np.max(np.abs(sol_b.psi(w) - solve(base, 1.0, Regime.UNCONSTRAINED).psi(w)))
    assert gap < 1e-3


def test_limit_b_to_mu(base, riccati, solutions):
    sol = solve(base.replace(b=0.0599), 1.0, Regime.BORROW, riccati)
    assert abs(sol.w_b - solutions[Regime.NO_BORROW].w_mu) < 0.05


def test_mu_below_lambda_wb_vanishes():
    params = MarketParams(0.02, 0.06, 0.2, 0.08)
    ric = solve_riccati(params, 1.0)
    levels = [solve(params.replace(b=b), 1.0, Regime.BORROW, ric).w_b for b in (0.05, 0.059, 0.0599, 0.05999)]
    assert all(x > y for x, y in zip(levels, levels[1:]))
    assert levels[-1] < 0.02


def test_riccati_mismatch_rejected(riccati, base):
    with pytest.raises(RuinError):
        solve(base.replace(mu=0.07), 1.0, Regime.NO_BORROW, riccati)
    # b is free to differ
    solve(base.replace(b=0.05), 1.0, Regime.BORROW, riccati)


def test_invalid_parameters(base):
    with pytest.raises(ParameterError):
        solve(base.replace(b=0.02), 1.0, Regime.BORROW)


def test_limit_sweep(base):
    rows = limit_sweep(base, 1.0, [0.02, 0.04, 0.055, 0.059, 0.0599])
    assert rows[0].error is not None and "b must exceed r" in rows[0].error
    good = rows[1:]
    assert all(r.error is None for r in good)
    lev = [r.leverage_at_zero for r in good]
    assert all(x < y for x, y in zip(lev, lev[1:]))
    assert lev[-1] > 10 * lev[0]
    assert good[0].psi_probes == pytest.approx(tuple(solve(base, 1.0, Regime.BORROW).psi(np.array([5.0, 10.0, 20.0]))))
    wbs = [r.w_b for r in limit_sweep(base, 1.0, [0.03, 0.021, 0.0201])]
    assert wbs[0] < wbs[1] < wbs[2] < W_L


def test_allocation_continuous_at_boundaries(solutions):
    for sol, points in ((solutions[Regime.BORROW], ("w_b", "w_l")), (solutions[Regime.NO_BORROW], ("w_l",))):
        for name in points:
            w = getattr(sol, name)
            left = float(sol.pistar(w * (1 - 1e-10)))
            right = float(sol.pistar(w * (1 + 1e-10)))
            assert abs(left - right) < 1e-6
