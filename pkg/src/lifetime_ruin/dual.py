"""Convex-dual solution on the leveraged region ``[0, w_b)``.

Below the borrowing level the HJB equation is fully nonlinear. Its Legendre
transform ``ht(v) = min_w [h(w) + w v]`` solves the linear Euler equation

    lam ht + (b - lam) v ht' - m_b v^2 ht'' = c v,

whose solutions are ``D1 v^B1 + D2 v^B2 + (c/b) v``. The marginal values run
from ``vb = -h'(w_b)`` up to ``v0 = -h'(0)``. With ``s = v / vb`` the transform
is kept in the scaled form

    ht(v) = vb * (a1 s^B1 + a2 s^B2) + (c/b) v,   a_i = D_i vb^(B_i - 1),

because ``vb ** (1 - B1)`` overflows once ``b`` approaches ``mu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, InversionError, RootError
from .model import MarketParams, sharpe_half_square

__all__ = [
    "DualSolution",
    "dual_exponents",
    "solve_dual",
    "dual_to_primal",
    "leverage_at_zero",
    "ratio_equation",
]

_MAX_LOG_RATIO = math.log(1e12)


def dual_exponents(params: MarketParams) -> tuple[float, float]:
    """Positive and negative roots of ``m_b B^2 - (b - lam + m_b) B - lam = 0``."""
    b, lam = params.borrow_rate, params.lam
    m_b = sharpe_half_square(params.mu - b, params.sigma)
    beta = b - lam + m_b
    root = math.sqrt(beta * beta + 4.0 * lam * m_b)
    # same closed forms, arranged so neither root suffers cancellation
    if beta >= 0:
        B1 = (beta + root) / (2.0 * m_b)
        B2 = -2.0 * lam / (beta + root)
    else:
        B2 = (beta - root) / (2.0 * m_b)
        B1 = -2.0 * lam / (beta - root)
    return B1, B2


@dataclass(frozen=True)
class DualSolution:
    """Dual value function on ``[vb, v0]`` for a fixed borrowing level ``wb``."""

    B1: float
    B2: float
    v0: float
    vb: float
    wb: float
    cb_ratio: float
    K1: float
    K2: float
    leverage_scale: float  # (mu - b) / sigma^2

    @property
    def log_ratio(self) -> float:
        return math.log(self.v0 / self.vb)

    @property
    def a1(self) -> float:
        return -self.K1 / (self.B1 * (self.B1 - self.B2))

    @property
    def a2(self) -> float:
        return -self.K2 / (self.B2 * (self.B1 - self.B2))

    @property
    def D1(self) -> float:
        with np.errstate(over="ignore", under="ignore"):
            return float(self.a1 * np.float64(self.vb) ** (1.0 - self.B1))

    @property
    def D2(self) -> float:
        with np.errstate(over="ignore", under="ignore"):
            return float(self.a2 * np.float64(self.vb) ** (1.0 - self.B2))

    def _powers(self, v):
        t = np.log(np.asarray(v, dtype=float) / self.vb)
        return np.exp((self.B1 - 1.0) * t), np.exp((self.B2 - 1.0) * t)

    def ht(self, v):
        """The dual function itself."""
        p1, p2 = self._powers(v)
        v = np.asarray(v, dtype=float)
        return v * (self.a1 * p1 + self.a2 * p2 + self.cb_ratio)

    def dht(self, v):
        """First derivative; equals the primal wealth at marginal value ``v``."""
        p1, p2 = self._powers(v)
        diff = self.B1 - self.B2
        return -(self.K1 * p1 + self.K2 * p2) / diff + self.cb_ratio

    def v_d2ht(self, v):
        """``v * ht''(v)``, negative on ``[vb, v0]``."""
        p1, p2 = self._powers(v)
        diff = self.B1 - self.B2
        return -(self.K1 * (self.B1 - 1.0) * p1 + self.K2 * (self.B2 - 1.0) * p2) / diff

    def d2ht(self, v):
        return self.v_d2ht(v) / np.asarray(v, dtype=float)

    def ode_residual(self, v, params: MarketParams):
        """Residual of the dual Euler equation relative to ``c v``."""
        v = np.asarray(v, dtype=float)
        b, lam = params.borrow_rate, params.lam
        m_b = sharpe_half_square(params.mu - b, params.sigma)
        c = self.cb_ratio * b
        res = lam * self.ht(v) + (b - lam) * v * self.dht(v) - m_b * v * self.v_d2ht(v) - c * v
        return res / (c * v)

    def inequality_margin(self) -> float:
        """Left side of the growth condition that guarantees a unique ratio root."""
        return self.K1


def ratio_equation(t, B1: float, B2: float, K1: float, K2: float, cb: float):
    """``h~'(v0) - 0`` written in ``t = ln(v0/vb)``; zero at the solution."""
    t = np.asarray(t, dtype=float)
    with np.errstate(over="ignore"):
        val = (K1 * np.exp((B1 - 1.0) * t) + K2 * np.exp((B2 - 1.0) * t)) / (B1 - B2)
    return val - cb


def _coefficients(params: MarketParams, c: float, wb: float):
    b, mu, s2 = params.borrow_rate, params.mu, params.sigma**2
    B1, B2 = dual_exponents(params)
    cb = c / b
    lev = (mu - b) / s2
    K1 = wb / lev + (cb - wb) * (1.0 - B2)
    K2 = -wb / lev + (cb - wb) * (B1 - 1.0)
    return B1, B2, cb, lev, K1, K2


def solve_dual(params: MarketParams, c: float, wb: float) -> DualSolution:
    """Solve for ``v0 / vb`` (in log space), then ``v0``, ``vb`` and the coefficients.

    The ratio equation equals ``c/b - wb < c/b`` at ratio 1 and increases
    without bound when ``K1 > 0``; its unique root is bracketed by doubling.
    """
    if not 0.0 < wb:
        raise DomainError("borrowing level must be positive")
    B1, B2, cb, lev, K1, K2 = _coefficients(params, c, wb)
    if K1 <= 0:
        raise RootError("growth condition K1 > 0 fails; no ratio root exists")

    def g(t):
        return float(ratio_equation(t, B1, B2, K1, K2, cb))

    hi = 1.0 / (B1 - 1.0)
    while g(hi) <= 0:
        hi *= 2.0
        if hi > _MAX_LOG_RATIO:
            raise RootError("ratio v0/vb exceeds 1e12 without a sign change")
    t = brentq(g, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    rho_1 = math.exp((B1 - 1.0) * t)
    rho_2 = math.exp((B2 - 1.0) * t)
    diff = B1 - B2
    denom = -rho_1 * K1 / (B1 * diff) - rho_2 * K2 / (B2 * diff) + cb
    if denom <= 0:
        raise RootError("normalisation h~(v0) = 1 has no positive solution")
    v0 = 1.0 / denom
    vb = v0 / math.exp(t)
    return DualSolution(B1=B1, B2=B2, v0=v0, vb=vb, wb=wb, cb_ratio=cb, K1=K1, K2=K2, leverage_scale=lev)


def invert_marginal(dual: DualSolution, w) -> np.ndarray:
    """Solve ``h~'(v) = w`` for ``v`` on ``[vb, v0]`` by vectorised bisection."""
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if np.any(w < 0) or np.any(w > dual.wb):
        raise DomainError(f"wealth must lie in [0, wb={dual.wb}]")
    lo = np.zeros_like(w)  # t = ln(v / vb); h~' decreases in t
    hi = np.full_like(w, dual.log_ratio)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        above = dual.dht(dual.vb * np.exp(mid)) > w
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
        if np.all(hi - lo <= 1e-15 * np.maximum(hi, 1e-300)):
            break
    t = 0.5 * (lo + hi)
    v = dual.vb * np.exp(t)
    if not np.all(np.isfinite(v)):
        raise InversionError("dual marginal inversion produced non-finite values")
    return v


def dual_to_primal(dual: DualSolution, w):
    """Ruin probability and risky holding on ``[0, wb)`` from the dual.

    Returns ``(psi, pistar)`` with ``psi = h~(v) - w v`` and
    ``pistar = -((mu - b) / sigma^2) v h~''(v)`` at the ``v`` where ``h~'(v) = w``.
    """
    scalar = np.ndim(w) == 0
    w_arr = np.atleast_1d(np.asarray(w, dtype=float))
    v = invert_marginal(dual, w_arr)
    psi = dual.ht(v) - w_arr * v
    pistar = -dual.leverage_scale * dual.v_d2ht(v)
    if scalar:
        return float(psi[0]), float(pistar[0])
    return psi, pistar


def leverage_at_zero(params: MarketParams, c: float, wb: float, dual: DualSolution | None = None) -> float:
    """Risky holding at zero wealth from the closed form at ``v = v0``.

    ``lev (B2 - 1) c/b + rho^(B1-1) (wb + lev (c/b - wb)(1 - B2))`` with
    ``lev = (mu - b)/sigma^2`` and ``rho = v0/vb``.
    """
    if dual is None:
        dual = solve_dual(params, c, wb)
    B1, B2, cb, lev, _, _ = _coefficients(params, c, wb)
    rho_pow = math.exp((B1 - 1.0) * dual.log_ratio)
    return lev * (B2 - 1.0) * cb + rho_pow * (wb + lev * (cb - wb) * (1.0 - B2))
