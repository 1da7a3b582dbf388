"""First-order Riccati reduction of the all-in-risky-asset ruin ODE.

On the region where the whole of wealth is held in the risky asset, the ruin
probability ``h`` solves the linear ODE

    lam h = (mu w - c) h' + 0.5 sigma^2 w^2 h''.

The ratio ``y = h / h'`` turns it into the Riccati equation

    sigma^2 w^2 (y' - 1) = -2 lam y^2 + 2 (mu w - c) y,

with the exact terminal value ``y(w_l) = -(c/r - w_l) / d``. We integrate
backward from ``w_l``. Backward integration is stable (``y = -c/lam`` attracts
as ``w`` decreases) but gets stiff like ``1/w^2``, so below a switch point the
solution comes from its asymptotic power series about ``w = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .errors import DomainError, IntegrationError, RootError
from .model import DerivedConstants, MarketParams, derive_constants

__all__ = [
    "AuxLine",
    "aux_line",
    "RiccatiSolution",
    "solve_riccati",
    "series_coefficients",
    "find_wb",
    "find_wmu",
    "reconstruct_h",
]

SERIES_TERMS = 14
SERIES_TOL = 1e-14
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


@dataclass(frozen=True)
class AuxLine:
    """Straight line ``slope * w + intercept`` compared against ``y``."""

    kind: str
    slope: float
    intercept: float

    def __call__(self, w):
        return self.slope * np.asarray(w, dtype=float) + self.intercept


def aux_line(kind: str, params: MarketParams, c: float) -> AuxLine:
    """Lines ``z`` (lending), ``z_b`` (borrowing) and ``z_mu`` (inflection)."""
    lam = params.lam
    if kind == "z":
        slope = (params.mu + params.r) / (2.0 * lam)
    elif kind == "z_b":
        slope = (params.mu + params.borrow_rate) / (2.0 * lam)
    elif kind == "z_mu":
        slope = params.mu / lam
    else:
        raise ValueError(f"unknown auxiliary line {kind!r}")
    return AuxLine(kind, slope, -c / lam)


def series_coefficients(params: MarketParams, c: float, n_terms: int = SERIES_TERMS) -> np.ndarray:
    """Coefficients ``y_n`` of the asymptotic expansion ``y ~ sum y_n w^n`` at 0.

    Matching powers of ``w`` gives ``y_0 = -c/lam``, ``y_1 = mu/lam`` and, for
    ``n >= 2``,

        2 c y_n = sigma^2 (n-1) y_{n-1} - sigma^2 [n == 2]
                  + 2 lam sum_{i=1}^{n-1} y_i y_{n-i} - 2 mu y_{n-1}.
    """
    lam, mu, s2 = params.lam, params.mu, params.sigma**2
    y = np.zeros(n_terms)
    y[0] = -c / lam
    if n_terms > 1:
        y[1] = mu / lam
    for n in range(2, n_terms):
        conv = float(np.dot(y[1:n], y[n - 1 : 0 : -1]))
        rhs = s2 * (n - 1) * y[n - 1] - 2.0 * mu * y[n - 1] + 2.0 * lam * conv
        if n == 2:
            rhs -= s2
        y[n] = rhs / (2.0 * c)
    return y


def _series_radius(coef: np.ndarray, scale: float, cap: float) -> float:
    """Largest w <= cap where the last retained term is below SERIES_TOL * scale."""
    last = abs(coef[-1])
    n = len(coef) - 1
    if last == 0.0:
        return cap
    return min(cap, (SERIES_TOL * scale / last) ** (1.0 / n))


@dataclass(frozen=True, eq=False)
class RiccatiSolution:
    """Dense solution of ``y = h/h'`` on ``[0, w_l]``.

    ``log_h`` holds ``ln h(w) - ln h(w_l)``, the integral of ``1/y`` from
    ``w_l``, so that ``h`` can be rebuilt from any anchor.
    """

    grid: np.ndarray
    y_values: np.ndarray
    dy_values: np.ndarray
    log_h: np.ndarray
    w_l: float
    w_switch: float
    series: np.ndarray
    params: MarketParams
    c: float
    junction_mismatch: float
    _y_interp: CubicHermiteSpline = field(repr=False)
    _log_interp: CubicHermiteSpline = field(repr=False)

    def _check(self, w):
        arr = np.asarray(w, dtype=float)
        if np.any(arr < -1e-12 * self.w_l) or np.any(arr > self.w_l * (1 + 1e-12)):
            raise DomainError(f"wealth must lie in [0, w_l={self.w_l}]")
        return np.clip(arr, 0.0, self.w_l)

    def y(self, w):
        arr = self._check(w)
        out = np.where(arr < self.w_switch, _poly(self.series, arr), self._y_interp(arr))
        return float(out) if out.ndim == 0 else out

    def dy(self, w):
        """Derivative of the interpolant (series derivative below the switch)."""
        arr = self._check(w)
        dser = np.polynomial.polynomial.polyder(self.series)
        out = np.where(arr < self.w_switch, _poly(dser, arr), self._y_interp(arr, 1))
        return float(out) if out.ndim == 0 else out

    def log_h_at(self, w):
        arr = self._check(w)
        out = self._log_interp(arr)
        return float(out) if out.ndim == 0 else out

    def residual(self, w):
        """``sigma^2 w^2 (y'-1) + 2 lam y^2 - 2 (mu w - c) y`` relative to term size."""
        p = self.params
        w = np.asarray(w, dtype=float)
        y, dy = self.y(w), self.dy(w)
        a = p.sigma**2 * w**2 * (dy - 1.0)
        b_ = 2.0 * p.lam * y**2
        c_ = 2.0 * (p.mu * w - self.c) * y
        return (a + b_ - c_) / np.maximum.reduce([np.abs(a), np.abs(b_), np.abs(c_)])


def _poly(coef, w):
    return np.polynomial.polynomial.polyval(w, coef)


def _rhs(params: MarketParams, c: float):
    lam, mu, s2 = params.lam, params.mu, params.sigma**2

    def f(w, u):
        y = u[0]
        return [1.0 + (-2.0 * lam * y * y + 2.0 * (mu * w - c) * y) / (s2 * w * w), 1.0 / y]

    return f


def solve_riccati(
    params: MarketParams,
    c: float,
    constants: DerivedConstants | None = None,
    *,
    grid_points: int = 2048,
    rtol: float = 1e-10,
    atol: float = 1e-10,
    method: str = "RK45",
) -> RiccatiSolution:
    """Integrate ``y`` backward from ``w_l`` and tabulate it on a uniform grid.

    The adaptive solver (``scipy.integrate.solve_ivp``) runs from ``w_l`` down
    to the switch point where the asymptotic series is accurate to
    ``SERIES_TOL``; the series covers the rest. ``junction_mismatch`` records
    the disagreement of the two at the switch point.
    """
    if constants is None:
        constants = derive_constants(params, c)
    w_l, d = constants.w_l, constants.d
    lam = params.lam
    y_l = -(constants.safe_level - w_l) / d

    series = series_coefficients(params, c)
    w_switch = _series_radius(series, c / lam, cap=0.5 * w_l)
    f = _rhs(params, c)
    sol = solve_ivp(f, (w_l, w_switch), [y_l, 0.0], method=method, rtol=rtol, atol=atol, dense_output=True)
    if sol.status != 0:
        raise IntegrationError(f"Riccati integration failed: {sol.message}")
    if np.any(sol.y[0] >= 0):
        raise IntegrationError("y crossed zero; h would not be strictly decreasing")

    y_switch_ode = sol.y[0, -1]
    y_switch_series = _poly(series, w_switch)
    mismatch = abs(y_switch_ode - y_switch_series) / abs(y_switch_series)

    grid = np.linspace(0.0, w_l, grid_points)
    upper = grid >= w_switch
    y_vals = np.empty_like(grid)
    log_h = np.empty_like(grid)
    dense = sol.sol(grid[upper])
    y_vals[upper] = dense[0]
    log_h[upper] = dense[1]
    y_vals[-1] = y_l
    log_h[-1] = 0.0

    low = grid[~upper]
    y_vals[~upper] = _poly(series, low)
    log_switch = sol.y[1, -1]
    # ln h(w) = ln h(w_switch) - int_w^{w_switch} ds / y(s), Gauss-Legendre on the series
    half = 0.5 * (w_switch - low)
    mid = 0.5 * (w_switch + low)
    nodes = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    integral = half * np.sum(_GL_WEIGHTS[None, :] / _poly(series, nodes), axis=1)
    log_h[~upper] = log_switch - integral

    if np.any(y_vals >= 0):
        raise IntegrationError("y is not negative on [0, w_l]")

    dy_vals = np.empty_like(grid)
    dy_vals[upper] = np.asarray(f(grid[upper], [y_vals[upper], None])[0], dtype=float)
    dser = np.polynomial.polynomial.polyder(series)
    dy_vals[~upper] = _poly(dser, low)

    y_interp = CubicHermiteSpline(grid, y_vals, dy_vals)
    log_interp = CubicHermiteSpline(grid, log_h, 1.0 / y_vals)
    return RiccatiSolution(
        grid=grid,
        y_values=y_vals,
        dy_values=dy_vals,
        log_h=log_h,
        w_l=w_l,
        w_switch=w_switch,
        series=series,
        params=params,
        c=c,
        junction_mismatch=mismatch,
        _y_interp=y_interp,
        _log_interp=log_interp,
    )


def _sign_change_root(g, grid: np.ndarray, what: str) -> float:
    # both curves start at -c/lam, so w = 0 is skipped; a geometric lead-in
    # below the first grid node catches roots that sit very close to zero
    lead = grid[1] * np.logspace(-10, 0, 41)[:-1]
    pts = np.concatenate([lead, grid[1:]])
    vals = g(pts)
    signs = np.sign(vals)
    idx = np.nonzero(signs[:-1] * signs[1:] < 0)[0]
    if len(idx) == 0:
        exact = np.nonzero(vals[:-1] == 0)[0]
        if len(exact):
            return float(pts[exact[0]])
        raise RootError(f"no sign change found for {what}")
    if len(idx) > 1:
        raise RootError(f"{what}: {len(idx)} sign changes, expected one")
    lo, hi = pts[idx[0]], pts[idx[0] + 1]
    return brentq(lambda w: float(g(w)), lo, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps)


def find_wb(riccati: RiccatiSolution, params: MarketParams, c: float) -> float:
    """Borrowing level: the unique root of ``y = z_b`` in ``(0, w_l)``."""
    zb = aux_line("z_b", params, c)
    grid = riccati.grid
    g = lambda w: riccati.y(w) - zb(w)  # noqa: E731
    if g(grid[-1]) >= 0:
        raise RootError("y - z_b does not turn negative at w_l; requires b > r")
    return _sign_change_root(g, grid, "borrowing level")


def find_wmu(riccati: RiccatiSolution, params: MarketParams, c: float) -> float:
    """Inflection point of the no-borrowing ruin probability; 0 when ``mu <= lam``."""
    if params.mu <= params.lam:
        return 0.0
    zmu = aux_line("z_mu", params, c)
    g = lambda w: riccati.y(w) - zmu(w)  # noqa: E731
    return _sign_change_root(g, riccati.grid, "inflection point")


def reconstruct_h(riccati: RiccatiSolution, anchor_w: float, anchor_value: float, w):
    """``h(w) = anchor_value * exp(int_{anchor_w}^w ds / y(s))`` on ``[0, w_l]``."""
    if not 0.0 < anchor_value <= 1.0:
        raise DomainError("anchor value must lie in (0, 1]")
    log_anchor = riccati.log_h_at(anchor_w)
    out = anchor_value * np.exp(riccati.log_h_at(w) - log_anchor)
    if not np.all(np.isfinite(out)):
        raise IntegrationError("reconstructed h is not finite")
    return float(out) if np.ndim(out) == 0 else out


def taylor_anchor(params: MarketParams, c: float, w) -> np.ndarray:
    """Two-term expansion ``-c/lam + (mu/lam) w``, kept as a cross-check."""
    return -c / params.lam + params.mu / params.lam * np.asarray(w, dtype=float)

