"""Solvers for the optimal dynamic pricing policy.

Two routes to the optimum over state-dependent rate vectors:

* solve_occupancy_vi -- relative value iteration on the uniformized chain
  (occupancy objective only, where the one-step reward decomposes cleanly).
* solve_direct -- box-constrained nonlinear maximization of the exact
  steady-state objective as a function of the truncated rate vector, from
  multiple starts (either objective).

Both return the greedy/optimized policy together with metrics recomputed
independently by the markov module.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .demand import (
    DemandFamily,
    Objective,
    QueueInstance,
    check_regularity,
    myopic_rate,
    revenue_curve,
)
from .markov import (
    Policy,
    PolicyMetrics,
    metrics,
    stationary_distribution,
)
from .optim import vector_golden_max

__all__ = [
    "SolverConfig",
    "SolveResult",
    "solve_occupancy_vi",
    "solve_direct",
    "verify_monotone",
    "average_arrival_rate",
]

_GROW_START_EXTRA = 8  # initial truncation is servers + this
_EVAL_SWEEPS = 15      # fixed-policy value sweeps between greedy updates


@dataclass(frozen=True)
class SolverConfig:
    """Knobs shared by both solvers.

    truncation None means adaptive: the state space grows until the solved
    policy leaves less than tail_mass probability at the boundary state.
    """

    truncation: int | None = None
    tail_mass: float = 1e-4
    tolerance: float = 1e-6
    max_iterations: int = 100_000
    restarts: int = 8
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.tail_mass < 1.0):
            raise ValueError("tail_mass must lie in (0, 1)")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.restarts < 1 or self.max_iterations < 1:
            raise ValueError("restarts and max_iterations must be positive")
        if self.truncation is not None and self.truncation < 2:
            raise ValueError("fixed truncation must be at least 2")


@dataclass(frozen=True)
class SolveResult:
    policy: Policy
    metrics: PolicyMetrics
    converged: bool
    iterations: int
    monotone: bool
    instance: QueueInstance

    def to_dict(self) -> dict:
        return {
            "rates": list(self.policy.rates),
            "metrics": self.metrics.to_dict(),
            "converged": self.converged,
            "iterations": self.iterations,
            "monotone": self.monotone,
        }


def _grow(m: int) -> int:
    return max(m + 4, math.ceil(1.5 * m))


def _is_concave_demand(inst: QueueInstance) -> bool:
    if inst.demand.family is DemandFamily.LOGISTIC:
        return check_regularity(inst.demand, 512).is_concave
    return True


class _InnerMax:
    """argmax over rate in [0, cap] of revenue(rate) + t*rate, vectorized in t.

    Linear demand has the closed-form stationary point; concave demand uses
    golden-section; non-concave (irregular logistic) falls back to a 512-point
    grid scan with golden refinement inside the bracketing cells.
    """

    def __init__(self, inst: QueueInstance, concave: bool):
        self.demand = inst.demand
        self.cap = inst.demand.b
        self.concave = concave
        self.tol = 1e-10 * self.cap
        if not concave:
            self.grid = np.linspace(0.0, self.cap, 512)
            self.grid_rev = revenue_curve(self.demand, self.grid)

    def __call__(self, t: np.ndarray) -> np.ndarray:
        d = self.demand
        if d.family is DemandFamily.LINEAR:
            return np.clip((d.b + d.a * t) / 2.0, 0.0, self.cap)
        if self.concave:
            lo = np.zeros_like(t)
            hi = np.full_like(t, self.cap)
        else:
            scores = self.grid_rev[None, :] + t[:, None] * self.grid[None, :]
            k = np.argmax(scores, axis=1)
            lo = self.grid[np.maximum(k - 1, 0)]
            hi = self.grid[np.minimum(k + 1, len(self.grid) - 1)]
        rates, _ = vector_golden_max(
            lambda lam: revenue_curve(d, lam) + t * lam, lo, hi, self.tol
        )
        return rates


def solve_occupancy_vi(inst: QueueInstance, cfg: SolverConfig | None = None) -> SolveResult:
    """Relative value iteration for the occupancy objective.

    The chain is uniformized at rate b + servers*mu; each sweep maximizes
    rate*(price(rate) + kappa*(h[i+1]-h[i])) per state, applies the Bellman
    operator, and renormalizes by h[0].  Iteration stops once the span of
    successive value differences drops below cfg.tolerance.  Between greedy
    sweeps the operator of the current greedy policy is applied a few extra
    times, which speeds convergence without changing the fixed point.
    """
    if inst.objective is not Objective.OCCUPANCY:
        raise ValueError("value iteration supports the occupancy objective only")
    cfg = cfg or SolverConfig()
    cap = inst.demand.b
    kappa = 1.0 / (cap + inst.servers * inst.mu)
    inner = _InnerMax(inst, _is_concave_demand(inst))
    c = inst.cost_rate

    m = cfg.truncation or (inst.servers + _GROW_START_EXTRA)
    h = np.zeros(m + 1)
    total_sweeps = 0
    converged = False
    while True:
        deaths = inst.mu * np.minimum(np.arange(m + 1), inst.servers)
        hold = -c * np.arange(m + 1, dtype=float)
        rates = np.zeros(m)
        while total_sweeps < cfg.max_iterations:
            t = kappa * (h[1:] - h[:-1])
            rates = inner(t)
            q = revenue_curve(inst.demand, rates) + t * rates
            th = hold + h
            th[:-1] += q
            th[1:] += kappa * deaths[1:] * (h[:-1] - h[1:])
            resid = th - h
            span = resid.max() - resid.min()
            h = th - th[0]
            total_sweeps += 1
            if span < cfg.tolerance:
                converged = True
                break
            # fixed-policy sweeps reuse the current greedy rates
            lam_full = np.concatenate([rates, [0.0]])
            rew = hold.copy()
            rew[:-1] += revenue_curve(inst.demand, rates)
            for _ in range(_EVAL_SWEEPS):
                th = rew + h
                th[:-1] += kappa * lam_full[:-1] * (h[1:] - h[:-1])
                th[1:] += kappa * deaths[1:] * (h[:-1] - h[1:])
                h = th - th[0]
            total_sweeps += _EVAL_SWEEPS
        policy = Policy(rates=tuple(rates))
        if cfg.truncation is not None:
            break
        tail = float(stationary_distribution(policy, inst).probs[-1])
        if tail < cfg.tail_mass or m > 100_000:
            break
        new_m = _grow(m)
        h = np.concatenate([h, np.full(new_m - m, h[-1])])
        m = new_m
        converged = False

    result_metrics = metrics(policy, inst)
    result = SolveResult(
        policy=policy,
        metrics=result_metrics,
        converged=converged,
        iterations=total_sweeps,
        monotone=False,
        instance=inst,
    )
    return _with_monotone(result)


def _policy_value_fn(inst: QueueInstance, m: int):
    """Fast objective: rate vector (length m) -> steady-state objective value."""
    deaths = inst.mu * np.minimum(np.arange(1, m + 1), inst.servers)
    log_deaths = np.log(deaths)
    idx = np.arange(m + 1, dtype=float)
    c = inst.cost_rate
    demand = inst.demand
    sojourn = inst.objective is Objective.SOJOURN
    cap = demand.b

    def value(x: np.ndarray) -> float:
        lam = np.clip(x, 0.0, cap)
        with np.errstate(divide="ignore"):
            steps = np.log(lam) - log_deaths
        lw = np.concatenate(([0.0], np.cumsum(steps)))
        w = np.exp(lw - lw.max())
        p = w / w.sum()
        rev = float(revenue_curve(demand, lam) @ p[:-1])
        el = float(idx @ p)
        if not sojourn:
            return rev - c * el
        lt = float(lam @ p[:-1])
        if lt <= 0.0:
            return 0.0
        return rev - c * el / lt

    return value


def _direct_starts(inst: QueueInstance, m: int, cfg: SolverConfig) -> list[np.ndarray]:
    """Multi-start points: best-static vector, scaled myopic vectors, random."""
    from .static_policy import optimal_static

    cap = inst.demand.b
    bar = myopic_rate(inst.demand)
    starts = []
    static_policy, _ = optimal_static(inst, gamma_max=min(m - 1, 48), rate_grid=256)
    x0 = np.zeros(m)
    x0[: static_policy.truncation] = static_policy.rates
    starts.append(x0)
    for s in (1.0, 0.5, 0.25, 0.1):
        starts.append(np.full(m, min(s * bar, cap)))
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(cfg.seed)))
    while len(starts) < max(cfg.restarts, 1):
        starts.append(rng.uniform(0.0, cap, size=m))
    return starts[: max(cfg.restarts, 1)]


def solve_direct(inst: QueueInstance, cfg: SolverConfig | None = None) -> SolveResult:
    """Direct nonlinear search over truncated rate vectors, either objective.

    Runs SLSQP with box bounds [0, b]^M and central-difference gradients from
    several starts, keeps the best exact objective, and grows the truncation
    until the boundary state's stationary mass is below cfg.tail_mass.  The
    all-zero policy (value 0) is always a fallback candidate.
    """
    cfg = cfg or SolverConfig()
    cap = inst.demand.b
    m = cfg.truncation or (inst.servers + _GROW_START_EXTRA)
    warm: np.ndarray | None = None
    total_iters = 0
    best_x = np.zeros(m)
    best_val = -np.inf
    best_ok = False
    while True:
        value = _policy_value_fn(inst, m)
        starts = _direct_starts(inst, m, cfg)
        if warm is not None:
            x = np.zeros(m)
            x[: len(warm)] = warm
            starts.insert(0, x)
        bounds = [(0.0, cap)] * m
        best_x = np.zeros(m)
        best_val = value(best_x)
        best_ok = True
        for x0 in starts:
            with warnings.catch_warnings():
                # SLSQP steps fractionally outside the box and clips back
                warnings.filterwarnings("ignore", message=".*outside bounds.*")
                res = minimize(
                    lambda x: -value(x),
                    np.clip(x0, 0.0, cap),
                    method="SLSQP",
                    jac="3-point",
                    bounds=bounds,
                    options={
                        "maxiter": 300,
                        "ftol": cfg.tolerance,
                        "finite_diff_rel_step": 1e-6,
                    },
                )
            total_iters += int(res.nit)
            cand = np.clip(res.x, 0.0, cap)
            cand_val = value(cand)
            if cand_val > best_val:
                best_x, best_val, best_ok = cand, cand_val, bool(res.success)
        if cfg.truncation is not None:
            break
        policy = Policy(rates=tuple(best_x))
        tail = float(stationary_distribution(policy, inst).probs[-1])
        if tail < cfg.tail_mass or m > 100_000:
            break
        warm = best_x
        m = _grow(m)

    if best_val <= 0.0:
        best_x = np.zeros(m)
        best_ok = True
    policy = Policy(rates=tuple(best_x))
    result = SolveResult(
        policy=policy,
        metrics=metrics(policy, inst),
        converged=best_ok,
        iterations=total_iters,
        monotone=False,
        instance=inst,
    )
    return _with_monotone(result)


def verify_monotone(result: SolveResult, slack: float | None = None) -> bool:
    """Check myopic_rate + slack >= rates[0] and rates[i] + slack >= rates[i+1].

    slack (default 1e-5 * b) absorbs solver noise; the optimal occupancy
    policy is nonincreasing in the state, so solved optima should pass.
    """
    if slack is None:
        slack = 1e-5 * result.instance.demand.b
    rates = result.policy.rates
    if not rates:
        return True
    if myopic_rate(result.instance.demand) + slack < rates[0]:
        return False
    return all(rates[i] + slack >= rates[i + 1] for i in range(len(rates) - 1))


def _with_monotone(result: SolveResult) -> SolveResult:
    from dataclasses import replace

    return replace(result, monotone=verify_monotone(result))


def average_arrival_rate(policy: Policy, inst: QueueInstance) -> float:
    """Long-run average admitted rate sum_i rates[i] * P_i.

    Raises UnstablePolicyError for infinite-support policies whose weight
    series diverges; a stable geometric tail contributes exactly
    tail_rate * tail mass.
    """
    dist = stationary_distribution(policy, inst)  # raises UnstablePolicyError
    lam = np.zeros(len(dist.probs))
    lam[: policy.truncation] = policy.rates
    return float(lam @ dist.probs + policy.tail_rate * dist.tail_mass_bound)
