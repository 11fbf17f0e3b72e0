"""Parametric demand families for price-sensitive queues.

Three families map a posted price to an effective Poisson arrival rate:

    linear        rate(p) = max(b - a*p, 0)
    exponential   rate(p) = b * exp(-a*p)
    logistic      rate(p) = b * (1 + exp(-a*p0)) / (1 + exp(a*(p - p0)))

All families satisfy rate(0) = b, so b doubles as the market-size cap on
arrival rates.  Each family is strictly decreasing on its support and has a
closed-form inverse, so arrival rates can be used as decision variables
interchangeably with prices.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

__all__ = [
    "DemandFamily",
    "Objective",
    "DemandModel",
    "QueueInstance",
    "RegularityReport",
    "rate_at_price",
    "price_at_rate",
    "revenue_rate",
    "revenue_curve",
    "myopic_rate",
    "check_regularity",
    "normalize_instance",
    "demand_to_json",
    "demand_from_json",
]


class DemandFamily(str, Enum):
    LINEAR = "linear"
    EXPONENTIAL = "exponential"
    LOGISTIC = "logistic"


class Objective(str, Enum):
    OCCUPANCY = "occupancy"
    SOJOURN = "sojourn"


@dataclass(frozen=True)
class DemandModel:
    """One demand family with price sensitivity a > 0 and market size b > 0.

    p0 is the logistic midpoint price and is ignored by the other families.
    """

    family: DemandFamily
    a: float
    b: float
    p0: float = 0.0

    def __post_init__(self):
        if not (self.a > 0 and math.isfinite(self.a)):
            raise ValueError(f"price sensitivity a must be positive, got {self.a}")
        if not (self.b > 0 and math.isfinite(self.b)):
            raise ValueError(f"market size b must be positive, got {self.b}")

    @property
    def max_rate(self) -> float:
        """Largest attainable arrival rate, reached at price 0."""
        return self.b


@dataclass(frozen=True)
class QueueInstance:
    """A fully specified pricing problem: demand, service, and penalty."""

    demand: DemandModel
    mu: float = 1.0
    servers: int = 1
    cost_rate: float = 1.0
    objective: Objective = Objective.OCCUPANCY

    def __post_init__(self):
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise ValueError(f"service rate mu must be positive, got {self.mu}")
        if not (self.cost_rate > 0 and math.isfinite(self.cost_rate)):
            raise ValueError(f"cost_rate must be positive, got {self.cost_rate}")
        if not (isinstance(self.servers, (int, np.integer)) and self.servers >= 1):
            raise ValueError(f"servers must be a positive integer, got {self.servers}")

    @property
    def capacity(self) -> float:
        """Total service capacity mu * servers."""
        return self.mu * self.servers


def rate_at_price(model: DemandModel, price: float) -> float:
    """Effective arrival rate at a posted price (clamped at 0)."""
    if price < 0:
        raise ValueError(f"price must be nonnegative, got {price}")
    a, b = model.a, model.b
    if model.family is DemandFamily.LINEAR:
        return max(b - a * price, 0.0)
    if model.family is DemandFamily.EXPONENTIAL:
        return b * math.exp(-a * price)
    # logistic; exponent can overflow for large a*(price - p0)
    x = a * (price - model.p0)
    if x > 700.0:
        return b * (1.0 + math.exp(-a * model.p0)) * math.exp(-x)
    return b * (1.0 + math.exp(-a * model.p0)) / (1.0 + math.exp(x))


def price_at_rate(model: DemandModel, rate: float) -> float:
    """Inverse of rate_at_price on (0, b].  Raises for rates outside that domain."""
    a, b = model.a, model.b
    if not (0 < rate <= b * (1 + 1e-12)):
        raise ValueError(f"rate must lie in (0, {b}], got {rate}")
    rate = min(rate, b)
    if model.family is DemandFamily.LINEAR:
        return (b - rate) / a
    if model.family is DemandFamily.EXPONENTIAL:
        return math.log(b / rate) / a
    # logistic closed form p = p0 + ln(b*(1+e^{-a p0})/rate - 1)/a, written as
    # ln(u + v) with v in log space so a*p0 >> 1 cannot round u + v to zero.
    u = b / rate - 1.0
    v = math.exp(math.log(b / rate) - a * model.p0)
    return max(model.p0 + math.log(u + v) / a, 0.0)


def revenue_rate(model: DemandModel, rate: float) -> float:
    """Instantaneous revenue rate rate * price(rate); 0 at rate 0 by continuity."""
    if rate == 0:
        return 0.0
    return rate * price_at_rate(model, rate)


def revenue_curve(model: DemandModel, rates: np.ndarray) -> np.ndarray:
    """Vectorized revenue over an array of rates in [0, b].

    Out-of-domain entries are clipped; rate 0 maps to revenue 0.  This is the
    fast path used by the solvers and grid searches.
    """
    lam = np.clip(np.asarray(rates, dtype=float), 0.0, model.b)
    a, b = model.a, model.b
    pos = lam > 0
    out = np.zeros_like(lam)
    if model.family is DemandFamily.LINEAR:
        return lam * (b - lam) / a
    if model.family is DemandFamily.EXPONENTIAL:
        np.divide(b, lam, out=out, where=pos)
        np.log(out, out=out, where=pos)
        return lam * out / a
    with np.errstate(divide="ignore"):
        ratio = np.divide(b, lam, out=np.ones_like(lam), where=pos)
        u = ratio - 1.0
        v = np.exp(np.log(ratio) - a * model.p0)
        price = np.maximum(model.p0 + np.log(u + v) / a, 0.0)
    out[pos] = lam[pos] * price[pos]
    return out


def myopic_rate(model: DemandModel) -> float:
    """Arrival rate maximizing the single-shot revenue rate over [0, b]."""
    if model.family is DemandFamily.LINEAR:
        return model.b / 2.0
    if model.family is DemandFamily.EXPONENTIAL:
        return model.b / math.e
    from .optim import grid_then_golden

    rate, _ = grid_then_golden(
        lambda lam: revenue_curve(model, lam), 0.0, model.b, n_grid=4096,
        tol=1e-13 * model.b,
    )
    return rate


@dataclass(frozen=True)
class RegularityReport:
    is_concave: bool
    worst_violation: float


def check_regularity(model: DemandModel, grid_points: int = 2001) -> RegularityReport:
    """Scan second differences of the revenue curve on a uniform rate grid.

    The demand is flagged concave (regular) when every second difference is
    at most +1e-9*b.  Solvers proceed either way; non-concave demand only
    switches them to grid-based inner searches.
    """
    if grid_points < 3:
        raise ValueError("grid_points must be at least 3")
    lam = np.linspace(0.0, model.b, grid_points)
    r = revenue_curve(model, lam)
    d2 = r[2:] - 2.0 * r[1:-1] + r[:-2]
    worst = float(d2.max())
    return RegularityReport(is_concave=bool(worst <= 1e-9 * model.b), worst_violation=worst)


def normalize_instance(inst: QueueInstance) -> tuple[QueueInstance, float]:
    """Rescale an instance to mu = cost_rate = 1 by changing time and money units.

    Time is measured in units of 1/mu and money in units of cost_rate/mu, so
    arrival rates scale by 1/mu and the demand's price axis rescales per
    family.  Returns the rescaled instance and the conversion constant
    1/(mu*cost_rate) between normalized and nominal value rates.  Objective
    ratios between any two policies are unchanged by the rescaling.
    """
    mu, c = inst.mu, inst.cost_rate
    d = inst.demand
    money = c / mu  # nominal money per normalized money unit
    if d.family is DemandFamily.LINEAR:
        nd = replace(d, a=d.a * money / mu, b=d.b / mu)
    elif d.family is DemandFamily.EXPONENTIAL:
        nd = replace(d, a=d.a * money, b=d.b / mu)
    else:
        nd = replace(d, a=d.a * money, b=d.b / mu, p0=d.p0 / money)
    out = QueueInstance(
        demand=nd, mu=1.0, servers=inst.servers, cost_rate=1.0,
        objective=inst.objective,
    )
    return out, 1.0 / (mu * c)


def demand_to_json(model: DemandModel) -> str:
    """Serialize to the {"family", "a", "b", "p0"} wire format."""
    return json.dumps(
        {"family": model.family.value, "a": model.a, "b": model.b, "p0": model.p0}
    )


def demand_from_json(text: str | dict) -> DemandModel:
    obj = json.loads(text) if isinstance(text, str) else text
    return DemandModel(
        family=DemandFamily(obj["family"]),
        a=float(obj["a"]),
        b=float(obj["b"]),
        p0=float(obj.get("p0", 0.0) or 0.0),
    )
