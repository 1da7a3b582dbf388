"""Monte Carlo estimate of the lifetime ruin probability.

Wealth follows the Euler scheme of

    dW = [r (W - pi)+ - b (pi - W)+ + mu pi - c(W)] dt + sigma pi dB

until ruin, death at an exponential time, the safe level ``c/r`` (constant
consumption only) or the horizon. Strategies are tabulated on a uniform wealth
grid and linearly interpolated inside the compiled kernel.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import _kernel
from .assembler import RuinSolution, solve
from .closedform import PowerSolution, solve_proportional
from .errors import ConfigError, StrategyError
from .model import ConstantConsumption, Consumption, MarketParams, ProportionalConsumption, Regime, validate

__all__ = [
    "StrategyTable",
    "SimConfig",
    "SimResult",
    "simulate",
    "trace",
    "convergence_study",
    "ConvergenceRow",
    "analytic_ruin",
    "heuristic_strategy",
    "TABLE_POINTS",
]

TABLE_POINTS = 8193
_CHUNK = 65536


@dataclass(frozen=True, eq=False)
class StrategyTable:
    """Allocation ``pi(w)`` on the uniform grid ``linspace(0, w_max, len(values))``.

    Above ``w_max`` the allocation is ``tail_fraction * w``.
    """

    w_max: float
    values: np.ndarray
    tail_fraction: float = 0.0

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 1 or len(vals) < 2:
            raise StrategyError("strategy table needs at least two values")
        if not self.w_max > 0 or not math.isfinite(self.w_max):
            raise StrategyError("strategy table needs a positive finite w_max")
        if not np.all(np.isfinite(vals)) or not math.isfinite(self.tail_fraction):
            raise StrategyError("strategy table contains non-finite allocations")

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.w_max, len(self.values))

    def __call__(self, w):
        w = np.asarray(w, dtype=float)
        inside = np.interp(w, self.grid, self.values)
        return np.where(w >= self.w_max, self.tail_fraction * w, inside)

    @classmethod
    def from_callable(cls, rule: Callable, w_max: float, points: int = TABLE_POINTS, tail_fraction=None):
        grid = np.linspace(0.0, w_max, points)
        try:
            vals = np.asarray(rule(grid), dtype=float)
            if vals.shape != grid.shape:
                raise ValueError
        except (TypeError, ValueError):
            vals = np.array([float(rule(w)) for w in grid])
        if tail_fraction is None:
            tail_fraction = vals[-1] / w_max
        return cls(w_max, vals, float(tail_fraction))

    def to_dict(self) -> dict:
        return {"w_max": self.w_max, "tail_fraction": self.tail_fraction, "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "StrategyTable":
        try:
            return cls(float(data["w_max"]), np.asarray(data["values"], dtype=float), float(data.get("tail_fraction", 0.0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed strategy table: {exc}") from exc


Strategy = Union[None, RuinSolution, PowerSolution, StrategyTable, Callable]


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo settings.

    ``max_horizon`` defaults to ``60 / lam``. ``bridge`` turns on the
    Brownian-bridge check for barrier crossings inside a step. ``workers``
    defaults to the number of CPUs; results do not depend on it.
    """

    n_paths: int
    dt: float
    seed: int
    w_start: float
    max_horizon: Optional[float] = None
    strategy: Strategy = field(default=None, compare=False)
    bridge: bool = True
    lanes: int = 32
    workers: Optional[int] = None

    def __post_init__(self):
        if isinstance(self.n_paths, bool) or not isinstance(self.n_paths, (int, np.integer)) or self.n_paths < 1:
            raise ConfigError(f"n_paths must be a positive integer, got {self.n_paths!r}")
        if not (isinstance(self.dt, (int, float)) and 0.0 < self.dt <= 0.1):
            raise ConfigError(f"dt must lie in (0, 0.1], got {self.dt!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an integer in [0, 2**64), got {self.seed!r}")
        if not (isinstance(self.w_start, (int, float)) and math.isfinite(self.w_start)):
            raise ConfigError("w_start must be a finite number")
        if self.lanes < 1:
            raise ConfigError("lanes must be at least 1")
        if self.workers is not None and self.workers < 1:
            raise ConfigError("workers must be at least 1")

    def horizon(self, lam: float) -> float:
        h = 60.0 / lam if self.max_horizon is None else float(self.max_horizon)
        if not h >= 10.0 / lam * (1 - 1e-12):
            raise ConfigError(f"max_horizon must be at least 10/lambda = {10.0 / lam:g}")
        return h


@dataclass(frozen=True)
class SimResult:
    """Counts of path outcomes and the ruin estimate ``n_ruined / n_paths``.

    ``n_censored`` counts paths stopped at the safe level or at the horizon;
    ``n_safe`` is the safe-level share of those.
    """

    ruin_probability: float
    std_error: float
    n_paths: int
    n_ruined: int
    n_died: int
    n_censored: int
    n_safe: int
    mean_time_to_absorption: float
    w_start: float
    dt: float
    seed: int
    runtime_seconds: float = field(default=0.0, compare=False)

    def to_dict(self, include_runtime: bool = False) -> dict:
        out = asdict(self)
        if not include_runtime:
            out.pop("runtime_seconds")
        return out


def heuristic_strategy(kind: str) -> Callable:
    """Simple comparison rules: ``riskless``, ``half`` (50% of wealth) or ``risky``."""
    rules = {
        "riskless": lambda w: np.zeros_like(np.asarray(w, dtype=float)),
        "half": lambda w: 0.5 * np.asarray(w, dtype=float),
        "risky": lambda w: np.asarray(w, dtype=float),
    }
    try:
        return rules[kind]
    except KeyError:
        raise ConfigError(f"unknown heuristic strategy {kind!r}") from None


def analytic_ruin(params: MarketParams, consumption: Consumption, regime, w):
    """Minimum ruin probability from the closed forms or the assembled solution."""
    regime = Regime.parse(regime)
    if isinstance(consumption, ConstantConsumption):
        return solve(params, consumption.c, regime).psi(w)
    return solve_proportional(params, consumption.p, consumption.w0, regime).psi(w)


def _levels(consumption: Consumption, params: MarketParams):
    if isinstance(consumption, ConstantConsumption):
        return 0.0, consumption.c / params.r, consumption.c, 0.0
    return consumption.w0, math.inf, 0.0, consumption.p


def _table_for(strategy: Strategy, params, consumption, regime, w_start) -> StrategyTable:
    if strategy is None:
        if isinstance(consumption, ConstantConsumption):
            strategy = solve(params, consumption.c, regime)
        else:
            strategy = solve_proportional(params, consumption.p, consumption.w0, regime)
    if isinstance(strategy, StrategyTable):
        return strategy
    if isinstance(strategy, PowerSolution):
        w_max = 4.0 * max(w_start, strategy.w0, 1.0)
        grid = np.linspace(0.0, w_max, TABLE_POINTS)
        return StrategyTable(w_max, strategy.investment_fraction * grid, strategy.investment_fraction)
    if isinstance(strategy, RuinSolution):
        return StrategyTable.from_callable(strategy.pistar, strategy.safe_level, tail_fraction=0.0)
    if callable(strategy):
        if isinstance(consumption, ConstantConsumption):
            w_max = consumption.c / params.r
        else:
            w_max = 4.0 * max(w_start, consumption.w0, 1.0)
        return StrategyTable.from_callable(strategy, w_max)
    raise StrategyError(f"unsupported strategy {strategy!r}")


def _check_feasible(table: StrategyTable, regime: Regime) -> None:
    if regime is not Regime.NO_BORROW:
        return
    tol = 1e-12 * max(1.0, table.w_max)
    if np.any(table.values < -tol):
        raise StrategyError("no-borrowing regime forbids negative allocations")
    if np.any(table.values > table.grid + tol) or not 0.0 <= table.tail_fraction <= 1.0 + 1e-12:
        raise StrategyError("no-borrowing regime forbids allocations above wealth")


def _prepare(params, consumption, regime, config):
    model = validate(params, consumption, regime)
    regime = model.regime
    horizon = config.horizon(params.lam)
    table = _table_for(config.strategy, params, consumption, regime, config.w_start)
    _check_feasible(table, regime)
    ruin, safe, cons, prop = _levels(consumption, params)
    b = params.borrow_rate if regime is Regime.BORROW else params.r
    n_horizon = int(math.ceil(horizon / config.dt - 1e-9))
    inv_h = (len(table.values) - 1) / table.w_max
    args = (ruin, safe, table.values, inv_h, table.tail_fraction,
            params.r, b, params.mu, params.sigma, params.lam, cons, prop,
            float(config.dt), n_horizon, bool(config.bridge))
    return args, ruin, safe


def simulate(params: MarketParams, consumption: Consumption, regime, config: SimConfig) -> SimResult:
    """Estimate the ruin probability from ``config.w_start`` under a strategy.

    Each path draws from its own stream keyed by ``(seed, path index)``, so
    the result is bit-identical for any number of workers or lanes.
    """
    start = time.perf_counter()
    args, ruin, safe = _prepare(params, consumption, regime, config)
    n = int(config.n_paths)
    w0 = float(config.w_start)
    codes = np.empty(n, np.int8)
    times = np.zeros(n)
    if w0 <= ruin:
        codes[:] = _kernel.RUINED
    elif w0 >= safe:
        codes[:] = _kernel.SAFE
    else:
        seed = np.uint64(config.seed)
        tables = (_kernel.ZIG_K, _kernel.ZIG_W, _kernel.ZIG_F)

        def run(lo):
            hi = min(lo + _CHUNK, n)
            _kernel.run_paths(lo, hi - lo, seed, w0, *args, int(config.lanes), *tables, codes[lo:hi], times[lo:hi])

        workers = config.workers or os.cpu_count() or 1
        chunks = range(0, n, _CHUNK)
        if workers == 1 or n <= _CHUNK:
            for lo in chunks:
                run(lo)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(run, chunks))

    counts = np.bincount(codes, minlength=4)
    n_ruined = int(counts[_kernel.RUINED])
    p = n_ruined / n
    return SimResult(
        ruin_probability=p,
        std_error=math.sqrt(p * (1.0 - p) / n),
        n_paths=n,
        n_ruined=n_ruined,
        n_died=int(counts[_kernel.DIED]),
        n_censored=int(counts[_kernel.SAFE] + counts[_kernel.HORIZON]),
        n_safe=int(counts[_kernel.SAFE]),
        mean_time_to_absorption=float(np.mean(times)),
        w_start=w0,
        dt=float(config.dt),
        seed=int(config.seed),
        runtime_seconds=time.perf_counter() - start,
    )


def trace(params: MarketParams, consumption: Consumption, regime, config: SimConfig, path_index: int = 0):
    """Wealth and allocation along one path; returns ``(wealth, allocation, code)``.

    The path uses the same stream as path ``path_index`` of :func:`simulate`.
    """
    args, ruin, safe = _prepare(params, consumption, regime, config)
    w0 = float(config.w_start)
    if w0 <= ruin or w0 >= safe:
        code = _kernel.RUINED if w0 <= ruin else _kernel.SAFE
        return np.array([w0]), np.array([]), code
    (ruin_, safe_, values, inv_h, tail, r, b, mu, sig, lam, cons, prop, dt, n_horizon, bridge) = args
    return _kernel.trace_path(
        int(path_index), np.uint64(config.seed), w0, ruin_, safe_, values, inv_h, tail,
        r, b, mu, sig, lam, cons, prop, dt, n_horizon, bridge,
        _kernel.ZIG_K, _kernel.ZIG_W, _kernel.ZIG_F,
    )


@dataclass(frozen=True)
class ConvergenceRow:
    w: float
    dt: float
    estimate: float
    std_error: float
    analytic: float

    @property
    def error(self) -> float:
        return self.estimate - self.analytic

    @property
    def z_score(self) -> float:
        return self.error / self.std_error if self.std_error > 0 else 0.0


def convergence_study(
    params: MarketParams,
    consumption: Consumption,
    regime,
    w_probes: Sequence[float],
    dt_ladder: Sequence[float],
    *,
    n_paths: int = 100_000,
    seed: int = 0,
    strategy: Strategy = None,
    bridge: bool = True,
) -> list[ConvergenceRow]:
    """Estimates at each probe wealth and step size against the analytic value.

    Every rung reuses the same seed, so paths share their random streams.
    """
    rows = []
    for w in w_probes:
        exact = float(analytic_ruin(params, consumption, regime, w))
        for dt in dt_ladder:
            cfg = SimConfig(n_paths=n_paths, dt=dt, seed=seed, w_start=float(w), strategy=strategy, bridge=bridge)
            res = simulate(params, consumption, regime, cfg)
            rows.append(ConvergenceRow(float(w), float(dt), res.ruin_probability, res.std_error, exact))
    return rows
