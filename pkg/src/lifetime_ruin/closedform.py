"""Closed-form ruin probabilities and strategies.

Covers the unconstrained constant-consumption case and every proportional
consumption case, where the ruin probability is the power law
``(w / w0) ** -a`` and the optimal allocation is a fixed fraction of wealth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CaseSelectionError, DomainError
from .model import DerivedConstants, MarketParams, Regime, sharpe_half_square

__all__ = [
    "psi_unconstrained",
    "pistar_unconstrained",
    "exponent_ar",
    "exponent_k",
    "exponent_ab",
    "PowerSolution",
    "solve_proportional",
    "CRRAEquivalent",
    "crra_equivalent",
    "proportional_hjb_residual",
    "CASE_TOL",
]

CASE_TOL = 1e-12


def _as_wealth(w):
    arr = np.asarray(w, dtype=float)
    if np.any(np.isnan(arr)):
        raise DomainError("wealth must not be NaN")
    return arr


def psi_unconstrained(w, constants: DerivedConstants):
    """Minimum ruin probability ``(1 - r w / c) ** d`` when borrowing costs ``r``."""
    arr = _as_wealth(w)
    if np.any(arr < 0):
        raise DomainError("wealth must be non-negative")
    base = np.clip(1.0 - arr / constants.safe_level, 0.0, 1.0)
    out = base**constants.d
    return float(out) if out.ndim == 0 else out


def pistar_unconstrained(w, constants: DerivedConstants):
    """Optimal risky holding ``x (c/r - w)``, linear and decreasing to 0 at ``c/r``."""
    arr = _as_wealth(w)
    if np.any(arr < 0) or np.any(arr > constants.safe_level):
        raise DomainError(f"wealth must lie in [0, {constants.safe_level}]")
    out = constants.x * (constants.safe_level - arr)
    return float(out) if out.ndim == 0 else out


def _positive_root(rate: float, m: float, lam: float, p: float) -> float:
    # positive root of (p - rate) a^2 + (p - rate - m - lam) a - lam = 0
    s = rate - p + lam + m
    return (s + math.sqrt(s * s + 4.0 * lam * (p - rate))) / (2.0 * (p - rate))


def exponent_ar(params: MarketParams, p: float) -> float:
    """Power-law exponent when borrowing and lending both happen at ``r``."""
    m = sharpe_half_square(params.mu - params.r, params.sigma)
    return _positive_root(params.r, m, params.lam, p)


def exponent_k(params: MarketParams, p: float) -> float:
    """Exponent when the whole of wealth sits in the risky asset."""
    s2 = params.sigma**2
    g = params.mu - p - 0.5 * s2
    return (g + math.sqrt(g * g + 2.0 * s2 * params.lam)) / s2


def exponent_ab(params: MarketParams, p: float) -> float:
    """Exponent when the investor borrows at ``b``: ``a_r`` with r, m -> b, m_b."""
    b = params.borrow_rate
    m_b = sharpe_half_square(params.mu - b, params.sigma)
    return _positive_root(b, m_b, params.lam, p)


@dataclass(frozen=True)
class PowerSolution:
    """``psi(w) = (w / w0) ** -exponent`` with ``pi*(w) = investment_fraction * w``."""

    exponent: float
    w0: float
    investment_fraction: float
    case: str
    regime: Regime

    def psi(self, w):
        arr = _as_wealth(w)
        if np.any(arr < 0):
            raise DomainError("wealth must be non-negative")
        with np.errstate(divide="ignore"):
            out = np.where(arr <= self.w0, 1.0, (np.maximum(arr, self.w0) / self.w0) ** -self.exponent)
        return float(out) if out.ndim == 0 else out

    def pistar(self, w):
        arr = _as_wealth(w)
        if np.any(arr < 0):
            raise DomainError("wealth must be non-negative")
        out = self.investment_fraction * arr
        return float(out) if out.ndim == 0 else out


def _merton_ratio(excess: float, sigma: float, a: float) -> float:
    return excess / sigma**2 / (a + 1.0)


def solve_proportional(params: MarketParams, p: float, w0: float, regime: "Regime | str") -> PowerSolution:
    """Select the exponent and allocation fraction for proportional consumption.

    Each case condition is evaluated with its own exponent. Exactly one must
    hold; on a tie (a ratio equal to 1 within :data:`CASE_TOL`) the truncated
    case ``pi* = w`` wins.
    """
    regime = Regime.parse(regime)
    mu, r, sigma = params.mu, params.r, params.sigma
    a_r = exponent_ar(params, p)
    ratio_r_ar = _merton_ratio(mu - r, sigma, a_r)

    if regime is Regime.UNCONSTRAINED:
        return PowerSolution(a_r, w0, ratio_r_ar, "a_r", regime)

    k = exponent_k(params, p)
    ratio_r_k = _merton_ratio(mu - r, sigma, k)

    if regime is Regime.NO_BORROW:
        fired = {"a_r": ratio_r_ar < 1.0, "k": ratio_r_k >= 1.0}
        ties = abs(ratio_r_ar - 1.0) <= CASE_TOL or abs(ratio_r_k - 1.0) <= CASE_TOL
        chosen = _pick(fired, ties)
        if chosen == "a_r":
            return PowerSolution(a_r, w0, ratio_r_ar, "a_r", regime)
        return PowerSolution(k, w0, 1.0, "k", regime)

    b = params.borrow_rate
    a_b = exponent_ab(params, p)
    ratio_b_k = _merton_ratio(mu - b, sigma, k)
    ratio_b_ab = _merton_ratio(mu - b, sigma, a_b)
    fired = {
        "a_r": ratio_r_ar < 1.0,
        "k": ratio_b_k < 1.0 <= ratio_r_k,
        "a_b": ratio_b_ab >= 1.0,
    }
    ties = any(abs(v - 1.0) <= CASE_TOL for v in (ratio_r_ar, ratio_r_k, ratio_b_k, ratio_b_ab))
    chosen = _pick(fired, ties)
    if chosen == "a_r":
        return PowerSolution(a_r, w0, ratio_r_ar, "a_r", regime)
    if chosen == "k":
        return PowerSolution(k, w0, 1.0, "k", regime)
    return PowerSolution(a_b, w0, ratio_b_ab, "a_b", regime)


def _pick(fired: dict, ties: bool) -> str:
    hits = [name for name, ok in fired.items() if ok]
    if len(hits) == 1:
        return hits[0]
    if ties:
        return "k"
    raise CaseSelectionError(
        "case conditions are not mutually exclusive"
        if hits
        else "no case condition holds; parameters are inconsistent"
    )


@dataclass(frozen=True)
class CRRAEquivalent:
    """Power-utility investor who acts identically: ``u(c) = c**eta / eta``."""

    risk_aversion: float
    eta: float
    discount: float


def crra_equivalent(a: float, lam: float, p: float) -> CRRAEquivalent:
    """Relative risk aversion ``1 + a`` and discount rate ``lam + p``."""
    if a <= 0:
        raise DomainError("exponent must be positive")
    return CRRAEquivalent(risk_aversion=1.0 + a, eta=-a, discount=lam + p)


def proportional_hjb_residual(solution: PowerSolution, params: MarketParams, p: float, w):
    """Generator of the killed wealth process applied to ``psi`` under ``pi*``.

    Returns ``drift * psi' + 0.5 sigma^2 pi^2 psi'' - lam psi`` divided by
    ``lam * psi``; it vanishes when the pair solves the HJB equation.
    """
    w = np.asarray(w, dtype=float)
    a, w0 = solution.exponent, solution.w0
    psi = (w / w0) ** -a
    dpsi = -a / w * psi
    d2psi = a * (a + 1.0) / w**2 * psi
    pi = solution.pistar(w)
    b = params.r if solution.regime is not Regime.BORROW else params.borrow_rate
    drift = (
        params.r * np.maximum(w - pi, 0.0)
        - b * np.maximum(pi - w, 0.0)
        + params.mu * pi
        - p * w
    )
    gen = drift * dpsi + 0.5 * params.sigma**2 * pi**2 * d2psi - params.lam * psi
    return gen / (params.lam * psi)
