"""Piecewise minimum ruin probability and optimal strategy for constant consumption.

Wealth splits into at most four regions, read left to right:

* ``dual``   ``[0, w_b)``   borrow regime only, leveraged (``pi* > w``)
* ``unit``   ``[., w_l)``   whole of wealth in the risky asset
* ``tail``   ``[w_l, c/r)`` ``psi = beta (1 - r w / c) ** d``, lends at ``r``
* ``safe``   ``[c/r, inf)`` riskless income covers consumption, ``psi = 0``

A point that sits on a boundary is evaluated with the right-hand formula.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .closedform import pistar_unconstrained, psi_unconstrained
from .dual import DualSolution, dual_to_primal, invert_marginal, leverage_at_zero, solve_dual
from .errors import DomainError, RuinError
from .model import ConstantConsumption, DerivedConstants, MarketParams, Regime, derive_constants, validate
from .riccati import RiccatiSolution, find_wb, find_wmu, solve_riccati

__all__ = [
    "Region",
    "RuinSolution",
    "solve",
    "evaluate",
    "RegimeComparison",
    "compare_regimes",
    "SweepRow",
    "limit_sweep",
]


@dataclass(frozen=True)
class Region:
    kind: str
    lo: float
    hi: float


@dataclass(frozen=True, eq=False)
class RuinSolution:
    """Immutable solved model; call :meth:`evaluate` for values on a grid.

    ``beta`` is the tail multiplier (``1`` when unconstrained). ``w_b`` is set
    only in the borrow regime; ``w_mu`` only in the no-borrow regime.
    """

    regime: Regime
    params: MarketParams
    c: float
    constants: DerivedConstants
    regions: tuple
    beta: float
    w_l: float
    w_b: Optional[float] = None
    w_mu: Optional[float] = None
    riccati: Optional[RiccatiSolution] = field(default=None, repr=False)
    dual: Optional[DualSolution] = field(default=None, repr=False)
    _log_anchor: float = field(default=0.0, repr=False)
    _h_anchor: float = field(default=1.0, repr=False)

    @property
    def safe_level(self) -> float:
        return self.constants.safe_level

    @property
    def d(self) -> float:
        return self.constants.d

    def boundaries(self) -> dict:
        out = {"w_l": self.w_l, "safe_level": self.safe_level}
        if self.w_b is not None:
            out["w_b"] = self.w_b
        if self.w_mu is not None:
            out["w_mu"] = self.w_mu
        return out

    def _tail(self, w):
        k = self.constants
        base = np.clip(1.0 - w / k.safe_level, 0.0, 1.0)
        return self.beta * base**k.d, k.x * np.maximum(k.safe_level - w, 0.0)

    def _unit(self, w):
        return self._h_anchor * np.exp(self.riccati.log_h_at(w) - self._log_anchor)

    def evaluate(self, w):
        """Return ``(psi, pistar, riskless_position)`` at wealth ``w``.

        ``riskless_position = w - pistar``; a negative value is money borrowed
        at rate ``b``.
        """
        scalar = np.ndim(w) == 0
        w = np.atleast_1d(np.asarray(w, dtype=float))
        if np.any(np.isnan(w)) or np.any(w < 0):
            raise DomainError("wealth must be non-negative")
        psi = np.zeros_like(w)
        pi = np.zeros_like(w)
        k = self.constants

        if self.regime is Regime.UNCONSTRAINED:
            live = w < k.safe_level
            psi[live] = psi_unconstrained(w[live], k)
            pi[live] = pistar_unconstrained(w[live], k)
        else:
            tail = (w >= self.w_l) & (w < k.safe_level)
            psi[tail], pi[tail] = self._tail(w[tail])
            lower = self.w_b if self.w_b is not None else 0.0
            unit = (w >= lower) & (w < self.w_l)
            psi[unit] = self._unit(w[unit])
            pi[unit] = w[unit]
            if self.w_b is not None:
                lev = w < self.w_b
                if np.any(lev):
                    psi[lev], pi[lev] = dual_to_primal(self.dual, w[lev])

        psi = np.clip(psi, 0.0, 1.0)
        zeta = w - pi
        if scalar:
            return float(psi[0]), float(pi[0]), float(zeta[0])
        return psi, pi, zeta

    def psi(self, w):
        return self.evaluate(w)[0]

    def pistar(self, w):
        return self.evaluate(w)[1]

    def dpsi(self, w):
        """Analytic first derivative of ``psi`` from each region's own formula."""
        w = np.atleast_1d(np.asarray(w, dtype=float))
        out = np.zeros_like(w)
        k = self.constants
        if self.regime is Regime.UNCONSTRAINED:
            live = w < k.safe_level
            out[live] = -k.d / k.safe_level * (1.0 - w[live] / k.safe_level) ** (k.d - 1.0)
            return out
        tail = (w >= self.w_l) & (w < k.safe_level)
        out[tail] = -self.beta * k.d / k.safe_level * (1.0 - w[tail] / k.safe_level) ** (k.d - 1.0)
        lower = self.w_b if self.w_b is not None else 0.0
        unit = (w >= lower) & (w < self.w_l)
        out[unit] = self._unit(w[unit]) / self.riccati.y(w[unit])
        if self.w_b is not None:
            lev = w < self.w_b
            if np.any(lev):
                out[lev] = -invert_marginal(self.dual, w[lev])
        return out


def evaluate(solution: RuinSolution, w):
    """Functional alias for :meth:`RuinSolution.evaluate`."""
    return solution.evaluate(w)


def solve(
    params: MarketParams,
    c: float,
    regime: "Regime | str",
    riccati: RiccatiSolution | None = None,
    *,
    grid_points: int = 2048,
) -> RuinSolution:
    """Solve the constant-consumption problem for one regime.

    A precomputed ``riccati`` solution may be passed in; it depends on
    ``r, mu, sigma, lam, c`` but not on ``b``, so sweeps over ``b`` share it.
    """
    model = validate(params, ConstantConsumption(c), regime)
    regime = model.regime
    k = derive_constants(params, c)
    safe = k.safe_level

    if regime is Regime.UNCONSTRAINED:
        regions = (Region("closed_form", 0.0, safe), Region("safe", safe, np.inf))
        return RuinSolution(regime, params, c, k, regions, beta=1.0, w_l=k.w_l)

    if riccati is None:
        riccati = solve_riccati(params, c, k, grid_points=grid_points)
    elif riccati.c != c or riccati.params.replace(b=None) != params.replace(b=None):
        raise RuinError("supplied Riccati solution was built for different parameters")

    tail_base = (1.0 - k.w_l / safe) ** k.d
    if regime is Regime.NO_BORROW:
        log0 = riccati.log_h_at(0.0)
        h_wl = float(np.exp(riccati.log_h_at(k.w_l) - log0))
        regions = (Region("unit", 0.0, k.w_l), Region("tail", k.w_l, safe), Region("safe", safe, np.inf))
        return RuinSolution(
            regime, params, c, k, regions,
            beta=h_wl / tail_base, w_l=k.w_l, w_mu=find_wmu(riccati, params, c),
            riccati=riccati, _log_anchor=log0, _h_anchor=1.0,
        )

    wb = find_wb(riccati, params, c)
    dual = solve_dual(params, c, wb)
    h_wb = float(dual.ht(dual.vb) - wb * dual.vb)
    log_wb = riccati.log_h_at(wb)
    h_wl = h_wb * float(np.exp(riccati.log_h_at(k.w_l) - log_wb))
    regions = (
        Region("dual", 0.0, wb),
        Region("unit", wb, k.w_l),
        Region("tail", k.w_l, safe),
        Region("safe", safe, np.inf),
    )
    return RuinSolution(
        regime, params, c, k, regions,
        beta=h_wl / tail_base, w_l=k.w_l, w_b=wb,
        riccati=riccati, dual=dual, _log_anchor=log_wb, _h_anchor=h_wb,
    )


@dataclass(frozen=True)
class RegimeComparison:
    """Ruin probabilities of the three regimes on a shared wealth grid."""

    w: np.ndarray
    psi: np.ndarray
    psi_0: np.ndarray
    psi_b: np.ndarray

    def ordering_violation(self) -> float:
        """Largest breach of ``psi <= psi_b <= psi_0``; ``<= 0`` means ordered."""
        return float(max(np.max(self.psi - self.psi_b), np.max(self.psi_b - self.psi_0)))

    def rows(self):
        return list(zip(self.w, self.psi, self.psi_0, self.psi_b))


def compare_regimes(params: MarketParams, c: float, w_grid) -> RegimeComparison:
    w = np.asarray(w_grid, dtype=float)
    riccati = solve_riccati(params, c)
    psi = solve(params, c, Regime.UNCONSTRAINED).psi(w)
    psi_0 = solve(params, c, Regime.NO_BORROW, riccati).psi(w)
    psi_b = solve(params, c, Regime.BORROW, riccati).psi(w)
    return RegimeComparison(w, np.atleast_1d(psi), np.atleast_1d(psi_0), np.atleast_1d(psi_b))


@dataclass(frozen=True)
class SweepRow:
    b: float
    w_b: float = float("nan")
    w_l: float = float("nan")
    beta_b: float = float("nan")
    leverage_at_zero: float = float("nan")
    psi_probes: tuple = ()
    error: Optional[str] = None


def limit_sweep(
    params: MarketParams,
    c: float,
    b_values: Sequence[float],
    probes: Sequence[float] = (5.0, 10.0, 20.0),
) -> list[SweepRow]:
    """Borrow-regime diagnostics for each ``b``; one Riccati solve serves all.

    Values that fail validation or solving produce a row carrying ``error``.
    """
    riccati = solve_riccati(params, c)
    rows = []
    for b in b_values:
        q = params.replace(b=float(b))
        try:
            sol = solve(q, c, Regime.BORROW, riccati)
            lev0 = leverage_at_zero(q, c, sol.w_b, sol.dual)
            psi = tuple(float(v) for v in np.atleast_1d(sol.psi(np.asarray(probes, dtype=float))))
            rows.append(SweepRow(float(b), sol.w_b, sol.w_l, sol.beta, lev0, psi))
        except (RuinError, ValueError) as exc:
            rows.append(SweepRow(float(b), error=f"{type(exc).__name__}: {exc}"))
    return rows
