"""Market parameters, consumption specifications and the regime taxonomy.

All rates are annual and real (inflation-adjusted). Wealth and consumption are
measured in the same currency unit, so ``c = 1`` means one unit per year.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Union

from .errors import ParameterError

__all__ = [
    "MarketParams",
    "ConstantConsumption",
    "ProportionalConsumption",
    "Consumption",
    "Regime",
    "Model",
    "DerivedConstants",
    "validate",
    "derive_constants",
    "sharpe_half_square",
]


@dataclass(frozen=True)
class MarketParams:
    """Riskless lending rate ``r``, borrowing rate ``b``, risky drift ``mu``,
    volatility ``sigma`` and hazard rate ``lam`` (expected lifetime ``1/lam``).

    ``b`` defaults to ``r``; it is only read by the borrowing regime.
    """

    r: float
    mu: float
    sigma: float
    lam: float
    b: float | None = None

    @property
    def borrow_rate(self) -> float:
        return self.r if self.b is None else self.b

    def replace(self, **changes) -> "MarketParams":
        fields = dict(r=self.r, mu=self.mu, sigma=self.sigma, lam=self.lam, b=self.b)
        fields.update(changes)
        return MarketParams(**fields)


@dataclass(frozen=True)
class ConstantConsumption:
    """Consume ``c`` dollars per year; ruin is wealth hitting 0."""

    c: float


@dataclass(frozen=True)
class ProportionalConsumption:
    """Consume ``p * w`` per year; ruin is wealth hitting ``w0 > 0``."""

    p: float
    w0: float


Consumption = Union[ConstantConsumption, ProportionalConsumption]


class Regime(str, enum.Enum):
    UNCONSTRAINED = "unconstrained"  # borrow and lend at r
    NO_BORROW = "noborrow"  # 0 <= pi <= w
    BORROW = "borrow"  # borrow at b > r, lend at r

    @classmethod
    def parse(cls, value: "str | Regime") -> "Regime":
        if isinstance(value, Regime):
            return value
        key = str(value).strip().lower().replace("_", "").replace("-", "")
        for member in cls:
            if member.value == key:
                return member
        raise ParameterError(
            f"unknown regime {value!r}; expected one of "
            + ", ".join(m.value for m in cls)
        )


@dataclass(frozen=True)
class Model:
    """A parameter set that passed :func:`validate` for ``regime``."""

    params: MarketParams
    consumption: Consumption
    regime: Regime


def sharpe_half_square(excess: float, sigma: float) -> float:
    """``0.5 * (excess / sigma)**2``, the squared-Sharpe constant."""
    return 0.5 * (excess / sigma) ** 2


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ParameterError(message)


def _finite(**values: float) -> None:
    for name, value in values.items():
        if value is None or not math.isfinite(value):
            raise ParameterError(f"{name} must be a finite number, got {value!r}")


def validate(params: MarketParams, consumption: Consumption, regime: "Regime | str") -> Model:
    """Check the model inequalities for ``regime`` and return a :class:`Model`.

    Raises
    ------
    ParameterError
        Naming the first violated inequality.
    """
    regime = Regime.parse(regime)
    _finite(r=params.r, mu=params.mu, sigma=params.sigma, lam=params.lam)
    _require(params.sigma > 0, "sigma must be positive")
    _require(params.lam > 0, "lambda must be positive")
    _require(params.r > 0, "r must be positive")
    _require(params.mu > params.r, "mu must exceed r")

    if regime is Regime.BORROW:
        _require(params.b is not None, "borrow regime requires a borrowing rate b")
        _finite(b=params.b)
        _require(params.b < params.mu, "b must be below mu")

    if isinstance(consumption, ConstantConsumption):
        _finite(c=consumption.c)
        _require(consumption.c > 0, "c must be positive")
        if regime is Regime.BORROW:
            # b == r is the unconstrained regime, solved in closed form
            _require(params.b > params.r, "b must exceed r in the borrow regime")
    elif isinstance(consumption, ProportionalConsumption):
        _finite(p=consumption.p, w0=consumption.w0)
        _require(consumption.p > params.r, "p must exceed r")
        _require(consumption.w0 > 0, "w0 must be positive")
        if regime is Regime.BORROW:
            _require(params.b >= params.r, "b must be at least r")
            _require(params.b < consumption.p, "b must be below p")
    else:
        raise ParameterError(f"unsupported consumption specification {consumption!r}")
    return Model(params, consumption, regime)


@dataclass(frozen=True)
class DerivedConstants:
    """Closed-form constants of the constant-consumption problem.

    Attributes
    ----------
    m, m_b : squared-Sharpe constants at the lending and borrowing rate
    d : exponent of the unconstrained ruin probability, always > 1
    x : investment slope ratio, ``pi*(w) = x * (c/r - w)``
    w_l : lending level, wealth above which the riskless position is positive
    safe_level : ``c / r``
    """

    m: float
    m_b: float
    d: float
    x: float
    w_l: float
    safe_level: float
    c: float
    r: float


def derive_constants(params: MarketParams, c: float) -> DerivedConstants:
    r, mu, sigma, lam = params.r, params.mu, params.sigma, params.lam
    m = sharpe_half_square(mu - r, sigma)
    m_b = sharpe_half_square(mu - params.borrow_rate, sigma)
    s = r + lam + m
    d = (s + math.sqrt(s * s - 4.0 * r * lam)) / (2.0 * r)
    x = (mu - r) / sigma**2 / (d - 1.0)
    safe = c / r
    w_l = x / (1.0 + x) * safe
    return DerivedConstants(m=m, m_b=m_b, d=d, x=x, w_l=w_l, safe_level=safe, c=c, r=r)
