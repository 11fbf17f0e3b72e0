"""Exact stationary analysis of the birth-death chain induced by a policy.

A policy is a finite vector of state-dependent arrival rates; state i has
birth rate rates[i] and death rate mu*min(i, C).  Everything downstream
(revenue, congestion cost, objective value, Little's-law quantities,
blocking) is computed from the stationary distribution of that chain.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .demand import Objective, QueueInstance, revenue_curve

__all__ = [
    "Policy",
    "StationaryDistribution",
    "PolicyMetrics",
    "UnstablePolicyError",
    "stationary_distribution",
    "stationary_mm1_truncated",
    "is_stable",
    "metrics",
    "sojourn_value",
]


class UnstablePolicyError(ValueError):
    """Raised when a policy's stationary distribution does not exist."""


@dataclass(frozen=True)
class Policy:
    """State-dependent arrival rates rates[0..M-1]; states >= M get tail_rate.

    tail_rate is almost always 0 (a truncated policy).  A nonzero tail_rate
    describes an infinite-support policy and is accepted only by the
    stability probe and tail-mass accounting, never by metrics().

    Static threshold policies carry their (rate, cutoff) parameters so the
    blocking state is known exactly.
    """

    rates: tuple
    static_rate: float | None = None
    cutoff: int | None = None
    tail_rate: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        if any(r < 0 or not math.isfinite(r) for r in self.rates):
            raise ValueError("policy rates must be finite and nonnegative")
        if self.tail_rate < 0:
            raise ValueError("tail_rate must be nonnegative")
        if (self.static_rate is None) != (self.cutoff is None):
            raise ValueError("static policies need both static_rate and cutoff")

    @property
    def is_static(self) -> bool:
        return self.static_rate is not None

    @property
    def truncation(self) -> int:
        """Number of states with a controllable rate; states 0..truncation exist."""
        return len(self.rates)


@dataclass(frozen=True)
class StationaryDistribution:
    probs: np.ndarray  # P_0..P_M
    stable: bool
    tail_mass_bound: float


@dataclass(frozen=True)
class PolicyMetrics:
    revenue: float
    cost: float
    objective_value: float
    avg_rate: float          # long-run average admitted arrival rate
    expected_number: float
    expected_sojourn: float  # expected_number / avg_rate; nan when avg_rate = 0
    blocking_prob: float

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_dict(self) -> dict:
        return {
            "revenue": self.revenue,
            "cost": self.cost,
            "objective": self.objective_value,
            "lambda_tilde": self.avg_rate,
            "expected_number": self.expected_number,
            "expected_sojourn": self.expected_sojourn,
            "blocking": self.blocking_prob,
        }


def _death_rates(n: int, mu: float, servers: int) -> np.ndarray:
    """Death rates mu*min(i, C) for states 1..n."""
    return mu * np.minimum(np.arange(1, n + 1), servers)


def _log_weights(rates: np.ndarray, mu: float, servers: int) -> np.ndarray:
    """log of the unnormalized stationary weights w_0=1, w_i = w_{i-1}*l_{i-1}/mu_i."""
    deaths = _death_rates(len(rates), mu, servers)
    with np.errstate(divide="ignore"):
        steps = np.log(rates) - np.log(deaths)
    lw = np.empty(len(rates) + 1)
    lw[0] = 0.0
    np.cumsum(steps, out=lw[1:])
    # a zero rate makes every later weight zero, not NaN
    dead = np.isneginf(lw[1:])
    if dead.any():
        first = int(np.argmax(dead)) + 1
        lw[first:] = -np.inf
    return lw


def stationary_distribution(policy: Policy, inst: QueueInstance) -> StationaryDistribution:
    """Stationary probabilities over states 0..M for a policy on an instance.

    Weights are accumulated in log space so products of many rate ratios
    cannot overflow.  For infinite-support policies (tail_rate > 0) the
    geometric tail beyond M is summed analytically; a tail ratio >= 1 means
    the chain is not positive recurrent and raises UnstablePolicyError.
    """
    rates = np.asarray(policy.rates, dtype=float)
    lw = _log_weights(rates, inst.mu, inst.servers)
    shift = lw.max()
    w = np.exp(lw - shift)
    total = w.sum()
    tail = 0.0
    if policy.tail_rate > 0:
        ratio = policy.tail_rate / (inst.mu * inst.servers)
        if ratio >= 1.0:
            raise UnstablePolicyError(
                f"tail rate {policy.tail_rate} >= capacity {inst.capacity}; "
                "weight series diverges"
            )
        # states M+1, M+2, ... continue geometrically from w_M
        tail = w[-1] * ratio / (1.0 - ratio)
        total += tail
    probs = w / total
    return StationaryDistribution(probs=probs, stable=True, tail_mass_bound=tail / total)


def stationary_mm1_truncated(rate: float, cutoff: int) -> StationaryDistribution:
    """Closed-form M/M/1/(cutoff+1) stationary probabilities at service rate 1.

    P_i = (1-r) r^i / (1 - r^(cutoff+2)) with the uniform branch taken for
    |r - 1| < 1e-9 where the formula has a removable singularity.
    """
    if rate < 0:
        raise ValueError(f"rate must be nonnegative, got {rate}")
    if cutoff < 0:
        raise ValueError(f"cutoff must be nonnegative, got {cutoff}")
    m = cutoff + 2  # number of states
    i = np.arange(m)
    if abs(rate - 1.0) < 1e-9:
        probs = np.full(m, 1.0 / m)
    elif rate < 1.0:
        probs = (1.0 - rate) / (1.0 - rate**m) * rate**i
    else:
        # multiply through by rate^(-m) so large rates cannot overflow
        probs = (rate - 1.0) / (1.0 - rate**(-m)) * rate ** (i - m).astype(float)
    return StationaryDistribution(probs=probs, stable=True, tail_mass_bound=0.0)


def is_stable(policy: Policy, inst: QueueInstance, horizon: int | None = None) -> bool:
    """Ratio test on the weight series b_n out to `horizon` states.

    Truncated policies (zero tail) are always stable.  Infinite-support
    policies extend at tail_rate and are stable iff the tail ratios stay
    bounded below 1 - 1e-6.
    """
    if horizon is None:
        horizon = max(4 * policy.truncation, 64)
    if horizon < policy.truncation:
        raise ValueError("horizon must cover the policy truncation")
    rates = np.zeros(horizon)
    rates[: policy.truncation] = policy.rates
    rates[policy.truncation:] = policy.tail_rate
    if np.all(rates[policy.truncation:] == 0) and policy.tail_rate == 0:
        return True
    deaths = _death_rates(horizon, inst.mu, inst.servers)
    ratios = rates / deaths
    tail = ratios[max(horizon - max(horizon // 4, 1), policy.truncation):]
    if tail.size == 0:
        return True
    return bool(np.all(tail < 1.0 - 1e-6))


def metrics(policy: Policy, inst: QueueInstance) -> PolicyMetrics:
    """All steady-state performance numbers for one policy on one instance.

    Revenue rate, congestion cost (occupancy or sojourn flavor), objective
    value, average admitted rate, E[number in system], E[sojourn] (defined
    as E[L]/avg_rate), and blocking probability.
    """
    if policy.tail_rate != 0:
        raise ValueError("metrics requires a truncated policy (tail_rate == 0)")
    b = inst.demand.b
    if policy.rates and max(policy.rates) > b * (1 + 1e-9):
        raise ValueError(f"policy rate {max(policy.rates)} exceeds demand cap {b}")
    dist = stationary_distribution(policy, inst)
    p = dist.probs
    n = len(p)
    lam = np.zeros(n)
    lam[: policy.truncation] = policy.rates
    rev = float(revenue_curve(inst.demand, lam) @ p)
    expected_number = float(np.arange(n) @ p)
    avg_rate = float(lam @ p)
    expected_sojourn = expected_number / avg_rate if avg_rate > 0 else math.nan
    if inst.objective is Objective.OCCUPANCY:
        cost = inst.cost_rate * expected_number
    else:
        cost = inst.cost_rate * expected_sojourn if avg_rate > 0 else 0.0
    if policy.is_static:
        # first state whose rate is zero: cutoff+1, or state 0 if nothing sells
        block_state = policy.cutoff + 1 if policy.static_rate > 0 else 0
        blocking = float(p[block_state]) if block_state < n else 0.0
    else:
        blocking = float(p[-1])
    return PolicyMetrics(
        revenue=rev,
        cost=cost,
        objective_value=rev - cost,
        avg_rate=avg_rate,
        expected_number=expected_number,
        expected_sojourn=expected_sojourn,
        blocking_prob=blocking,
    )


def sojourn_value(policy: Policy, inst: QueueInstance) -> float:
    """Objective under the sojourn penalty: revenue - cost_rate*E[L]/avg_rate.

    A policy admitting nobody has no sojourns to penalize; its value is 0.
    """
    from dataclasses import replace

    return metrics(policy, replace(inst, objective=Objective.SOJOURN)).objective_value
