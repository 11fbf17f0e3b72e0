"""Static threshold policies and their worst-case guarantee constants.

A static threshold policy posts one price (equivalently one arrival rate)
whenever the system holds at most `cutoff` customers and blocks arrivals
above that.  This module constructs and optimizes such policies, and
computes the constants that bound how much revenue/cost/profit/sojourn such
a policy can lose against the optimal dynamic policy for given (cutoff,
servers).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .demand import (
    DemandFamily,
    DemandModel,
    Objective,
    QueueInstance,
    revenue_curve,
)
from .markov import Policy, metrics
from .optim import golden_section_max, grid_then_golden

__all__ = [
    "GuaranteeBundle",
    "make_static",
    "tilde_static",
    "optimal_static",
    "optimal_static_unthresholded",
    "cost_factor_mm1",
    "cost_factor",
    "revenue_guarantee",
    "profit_guarantee",
    "sojourn_guarantees",
    "tightness_instance",
    "guarantee_bundle",
    "static_value_table",
]

DEFAULT_GAMMA_MAX = 64
DEFAULT_RATE_GRID = 1024


@dataclass(frozen=True)
class GuaranteeBundle:
    """Guarantee constants for one (servers, cutoff) pair.

    profit/revenue factors are fractions of the dynamic optimum that the
    constructed static policy retains; cost/sojourn factors are the largest
    inflation it can suffer.
    """

    servers: int
    cutoff: int
    profit_factor: float
    revenue_factor: float
    cost_factor: float
    sojourn_revenue_factor: float
    sojourn_cost_factor: float


def make_static(rate: float, cutoff: int) -> Policy:
    """Static policy: arrival rate `rate` in states 0..cutoff, 0 above."""
    if not (rate >= 0 and math.isfinite(rate)):
        raise ValueError(f"rate must be finite and nonnegative, got {rate}")
    if not (isinstance(cutoff, (int, np.integer)) and cutoff >= 0):
        raise ValueError(f"cutoff must be a nonnegative integer, got {cutoff}")
    return Policy(rates=(float(rate),) * (cutoff + 1), static_rate=float(rate), cutoff=int(cutoff))


# ---------------------------------------------------------------------------
# vectorized evaluation of static policies over a (rate grid) x (cutoff) table
# ---------------------------------------------------------------------------

def static_value_table(inst: QueueInstance, rates: np.ndarray, gamma_max: int) -> dict:
    """Metrics of every static policy (rate in `rates`, cutoff in 0..gamma_max).

    All quantities come out as (len(rates), gamma_max+1) arrays.  Weights are
    handled in log space (cumulative logaddexp) so long queues and large
    rates cannot overflow.  Objective value at rate 0 is 0 for both
    objective flavors.
    """
    lam = np.asarray(rates, dtype=float)
    n_states = gamma_max + 2
    i = np.arange(n_states)
    deaths = inst.mu * np.minimum(i[1:], inst.servers)
    log_v = np.concatenate(([0.0], -np.cumsum(np.log(deaths))))
    with np.errstate(divide="ignore", invalid="ignore"):
        log_lam = np.log(lam)
        lw = i[None, :] * log_lam[:, None] + log_v[None, :]
    lw[:, 0] = 0.0
    if np.any(lam == 0):
        lw[lam == 0, 1:] = -np.inf
    log_sum = np.logaddexp.accumulate(lw, axis=1)          # log sum_{k<=i} w_k
    log_num_l = np.logaddexp.accumulate(lw[:, 1:] + np.log(i[1:])[None, :], axis=1)

    cols = np.arange(1, n_states)                          # blocking state per cutoff
    log_s = log_sum[:, cols]
    blocking = np.exp(lw[:, cols] - log_s)
    expected_number = np.exp(log_num_l - log_s)
    admit = 1.0 - blocking
    rev = revenue_curve(inst.demand, lam)[:, None] * admit
    avg_rate = lam[:, None] * admit
    if inst.objective is Objective.OCCUPANCY:
        cost = inst.cost_rate * expected_number
        value = rev - cost
    else:
        with np.errstate(invalid="ignore", divide="ignore"):
            cost = inst.cost_rate * expected_number / avg_rate
        value = rev - cost
        value[avg_rate <= 0] = 0.0
        cost[avg_rate <= 0] = 0.0
    return {
        "value": value,
        "revenue": rev,
        "cost": cost,
        "avg_rate": avg_rate,
        "expected_number": expected_number,
        "blocking": blocking,
    }


def _best_cutoff_for_rate(inst: QueueInstance, rate: float, gamma_max: int) -> int:
    table = static_value_table(inst, np.asarray([rate]), gamma_max)
    return int(np.argmax(table["value"][0]))


def tilde_static(inst: QueueInstance, dynamic, gamma_max: int = DEFAULT_GAMMA_MAX):
    """Best-cutoff static policy at the dynamic solution's average arrival rate.

    `dynamic` is a solved result (anything exposing .metrics.avg_rate) or the
    average rate itself.  This is the policy class behind the worst-case
    guarantees; the cutoff is chosen by scanning 0..gamma_max under the
    instance's objective.
    """
    rate = getattr(getattr(dynamic, "metrics", dynamic), "avg_rate", None)
    if rate is None:
        rate = float(dynamic)
    if rate <= 0:
        policy = make_static(0.0, 0)
        return policy, metrics(policy, inst)
    rate = min(float(rate), inst.demand.b)
    best_gamma = _best_cutoff_for_rate(inst, rate, gamma_max)
    policy = make_static(rate, best_gamma)
    return policy, metrics(policy, inst)


def optimal_static(
    inst: QueueInstance,
    gamma_max: int = DEFAULT_GAMMA_MAX,
    rate_grid: int = DEFAULT_RATE_GRID,
):
    """Jointly optimize the static rate and cutoff for an instance.

    Grid scan over rates in [0, b] for every cutoff, then golden-section
    refinement of the rate inside the best grid cell.  The all-zero policy is
    always on the grid, so the returned value is never below 0.
    """
    if gamma_max < 0 or rate_grid < 2:
        raise ValueError("need gamma_max >= 0 and rate_grid >= 2")
    lam = np.linspace(0.0, inst.demand.b, rate_grid)
    value = static_value_table(inst, lam, gamma_max)["value"]
    flat = int(np.argmax(value))
    k, gamma = divmod(flat, gamma_max + 1)

    def value_at(rate: float) -> float:
        return metrics(make_static(rate, gamma), inst).objective_value

    lo = lam[max(k - 1, 0)]
    hi = lam[min(k + 1, rate_grid - 1)]
    rate, refined = golden_section_max(value_at, lo, hi, tol=1e-11 * inst.demand.b)
    if value[k, gamma] > refined:
        rate = lam[k]
    policy = make_static(float(rate), int(gamma))
    return policy, metrics(policy, inst)


def optimal_static_unthresholded(inst: QueueInstance, rate_grid: int = 4096):
    """Best single-price policy with no cutoff, single server only.

    The queue must stay stable, so the rate search runs over
    [0, min(b, mu)).  Returns (rate, value) using the closed-form M/M/1
    mean queue length.  Used to show how badly threshold-free static
    pricing can do.
    """
    if inst.servers != 1:
        raise ValueError("unthresholded search is only supported for one server")
    mu, c = inst.mu, inst.cost_rate
    hi = min(inst.demand.b, mu * (1.0 - 1e-9))

    def value(lam_arr):
        lam_arr = np.atleast_1d(np.asarray(lam_arr, dtype=float))
        rho = lam_arr / mu
        rev = revenue_curve(inst.demand, lam_arr)
        el = rho / (1.0 - rho)
        if inst.objective is Objective.OCCUPANCY:
            out = rev - c * el
            out[lam_arr == 0] = 0.0
        else:
            with np.errstate(divide="ignore"):
                out = rev - c / (mu - lam_arr)
            out[lam_arr == 0] = 0.0
        return out

    rate, val = grid_then_golden(value, 0.0, hi, n_grid=rate_grid, tol=1e-12 * max(hi, 1.0))
    if val <= 0.0:
        return 0.0, 0.0
    return rate, val


# ---------------------------------------------------------------------------
# guarantee constants
# ---------------------------------------------------------------------------

def cost_factor_mm1(cutoff: int) -> float:
    """Worst-case cost inflation of the constructed single-server policy.

    Maximizes sum_{j=1}^{cutoff+1} j*r^j / sum_{i=1}^{cutoff+2} r^i over
    r in [0, 1] numerically (1e5-point grid plus golden refinement).  Known
    closed forms: 1 at cutoff 0, 2/sqrt(3) at 1, ~1.532 at 2, (cutoff+1)/2
    from cutoff 3 on.
    """
    if cutoff < 0:
        raise ValueError("cutoff must be nonnegative")
    j = np.arange(1, cutoff + 2)
    num_coef = j[::-1].astype(float)                  # j * r^(j-1), high power first
    den_coef = np.ones(cutoff + 2)                    # r^(i-1), i = 1..cutoff+2

    def f(r):
        r = np.asarray(r, dtype=float)
        return np.polyval(num_coef, r) / np.polyval(den_coef, r)

    _, val = grid_then_golden(f, 0.0, 1.0, n_grid=100_000, tol=1e-13)
    return float(val)


def _norm_weight_ratios(servers: int, cutoff: int) -> np.ndarray:
    """w_i / w_C for the chain at arrival rate C, i = 0..cutoff+1 (mu = 1)."""
    c = servers
    i = np.arange(cutoff + 2)
    log_w = i * math.log(c) - gammaln(np.minimum(i, c) + 1.0)
    log_w[i > c] = c * math.log(c) - gammaln(c + 1.0)
    return np.exp(log_w - (c * math.log(c) - gammaln(c + 1.0)))


def cost_factor(cutoff: int, servers: int) -> float:
    """Multi-server worst-case cost inflation factor.

    Maximizes E[number in system]/rate over rates in [0, servers] for the
    truncated chain (dense grid plus golden refinement).  The rate -> 0
    limit equals 1 and is handled by evaluating the ratio of first-order
    weights, so no 0/0 arises.  Requires cutoff >= servers - 1.
    """
    if servers < 1:
        raise ValueError("servers must be >= 1")
    if cutoff < servers - 1:
        raise ValueError(f"cutoff must be at least servers-1 = {servers - 1}")
    c = servers
    i = np.arange(cutoff + 2)
    # u_i = (rate/C)^i * C^i / prod min(k, C); bounded for desk-scale C
    log_u = i * math.log(c) - np.concatenate(
        ([0.0], np.cumsum(np.log(np.minimum(i[1:], c))))
    )
    u = np.exp(log_u)
    num_coef = (i[1:] * u[1:] / c)[::-1]              # sum i*u_i*t^(i-1) / C
    den_coef = u[::-1]                                # sum u_i*t^i

    def f(t):
        t = np.asarray(t, dtype=float)
        return np.polyval(num_coef, t) / np.polyval(den_coef, t)

    _, val = grid_then_golden(f, 0.0, 1.0, n_grid=10_000, tol=1e-13)
    return float(val)


def revenue_guarantee(cutoff: int, servers: int) -> float:
    """Revenue fraction retained by the constructed policy.

    Equals one minus the blocking probability of the truncated chain run at
    arrival rate C; log-factorial arithmetic keeps C = 100 exact.  Requires
    cutoff >= servers - 1; reduces to (cutoff+1)/(cutoff+2) for one server.
    """
    if servers < 1:
        raise ValueError("servers must be >= 1")
    if cutoff < servers - 1:
        raise ValueError(f"cutoff must be at least servers-1 = {servers - 1}")
    c = servers
    l = np.arange(c + 1)
    ratios = np.exp(l * math.log(c) - gammaln(l + 1.0) - (c * math.log(c) - gammaln(c + 1.0)))
    denom = ratios.sum() + (cutoff + 1 - c)
    return 1.0 - 1.0 / denom


def profit_guarantee(servers: int) -> float:
    """Fraction of the optimal profit guaranteed at cutoff servers-1."""
    return revenue_guarantee(servers - 1, servers)


def sojourn_guarantees(cutoff: int, servers: int) -> tuple[float, float]:
    """(revenue factor, sojourn inflation factor) under the sojourn penalty.

    The revenue factor coincides with revenue_guarantee; the sojourn factor
    is the worst-case ratio of expected sojourn times, which collapses to
    (cutoff+2)/2 for one server and to exactly 1 at cutoff = servers-1.
    """
    if servers < 1:
        raise ValueError("servers must be >= 1")
    if cutoff < servers - 1:
        raise ValueError(f"cutoff must be at least servers-1 = {servers - 1}")
    c = servers
    i = np.arange(c + 1)
    ratios = np.exp(i * math.log(c) - gammaln(i + 1.0) - (c * math.log(c) - gammaln(c + 1.0)))
    num = float((i[1:] * ratios[1:]).sum())
    if cutoff + 1 > c:
        num += float(np.arange(c + 1, cutoff + 2).sum())
    den = c * (float(ratios.sum()) + (cutoff - c))
    return revenue_guarantee(cutoff, servers), float(num / den)


def tightness_instance(kappa: float, a: float) -> QueueInstance:
    """Single-server linear instance with b = kappa*a, mu = cost_rate = 1.

    For 1 < kappa < 2 the largest price anyone pays is below the expected
    penalty of queueing behind a busy server, so the dynamic optimum blocks
    at occupancy 1; this family drives every guarantee to its bound.
    """
    if not (1.0 < kappa < 2.0):
        raise ValueError(f"kappa must lie in (1, 2), got {kappa}")
    if not (a > 0):
        raise ValueError(f"a must be positive, got {a}")
    demand = DemandModel(family=DemandFamily.LINEAR, a=a, b=kappa * a)
    return QueueInstance(demand=demand, mu=1.0, servers=1, cost_rate=1.0,
                         objective=Objective.OCCUPANCY)


def guarantee_bundle(cutoff: int, servers: int) -> GuaranteeBundle:
    """All guarantee constants for one (cutoff, servers) pair."""
    sj_rev, sj_cost = sojourn_guarantees(cutoff, servers)
    return GuaranteeBundle(
        servers=servers,
        cutoff=cutoff,
        profit_factor=profit_guarantee(servers),
        revenue_factor=revenue_guarantee(cutoff, servers),
        cost_factor=cost_factor(cutoff, servers),
        sojourn_revenue_factor=sj_rev,
        sojourn_cost_factor=sj_cost,
    )
