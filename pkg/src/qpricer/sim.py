"""Continuous-time Monte Carlo oracle for the controlled birth-death queue.

Simulates arrivals/services under a policy event by event, tracking
time-weighted occupancy, per-admission revenue, and individual sojourns, and
reports batch-means confidence intervals for every analytic metric.  This is
the independent check on the stationary analysis in markov.py.

Randomness comes from the counter-based Philox generator, so identical
(policy, instance, horizon, seed) inputs reproduce bit-identical results.
Parallel replications should draw their streams via stream(seed, index),
which spawns independent substreams from the same root seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import t as t_dist

from .demand import Objective, QueueInstance, price_at_rate
from .markov import Policy, PolicyMetrics, metrics

__all__ = ["SimResult", "SimCheck", "stream", "simulate", "compare_to_analytic", "z_scores"]

N_BATCHES = 32
WARMUP_FRAC = 0.05
_CRIT = float(t_dist.ppf(0.975, N_BATCHES - 1))


def stream(seed: int, index: int | None = None) -> np.random.Generator:
    """Deterministic random stream; (seed, index) names a replicate substream."""
    if index is None:
        ss = np.random.SeedSequence(seed)
    else:
        ss = np.random.SeedSequence(entropy=seed, spawn_key=(index,))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class SimResult:
    estimates: PolicyMetrics
    half_widths: PolicyMetrics
    events_processed: int
    seed: int
    max_occupancy: int
    admitted: int
    departed: int
    in_system: int

    def to_dict(self) -> dict:
        return {
            "estimates": self.estimates.to_dict(),
            "half_widths": self.half_widths.to_dict(),
            "events_processed": self.events_processed,
            "seed": self.seed,
            "max_occupancy": self.max_occupancy,
            "admitted": self.admitted,
            "departed": self.departed,
            "in_system": self.in_system,
        }


@dataclass(frozen=True)
class SimCheck:
    max_z_score: float
    passed: bool
    z_scores: dict


def _mean_hw(values: np.ndarray) -> tuple[float, float]:
    values = values[~np.isnan(values)]
    if len(values) < 2:
        return math.nan, math.nan
    mean = float(values.mean())
    hw = _CRIT * float(values.std(ddof=1)) / math.sqrt(len(values))
    return mean, hw


def simulate(policy: Policy, inst: QueueInstance, horizon_events: int, seed: int) -> SimResult:
    """Event-driven simulation for `horizon_events` transitions.

    The first 5% of events are warm-up and excluded from estimation; the
    rest are split into 32 equal-count batches for the confidence intervals.
    95% half-widths use the Student-t critical value on batch means.
    """
    if horizon_events < 1000:
        raise ValueError("horizon_events must be at least 1000 for batch means")
    if policy.tail_rate != 0:
        raise ValueError("simulate requires a truncated policy")
    warmup = int(WARMUP_FRAC * horizon_events)
    if horizon_events - warmup < N_BATCHES:
        raise ValueError("horizon too small to fill 32 batches after warm-up")

    rates = list(policy.rates)
    m = len(rates)
    prices = [price_at_rate(inst.demand, r) if r > 0 else 0.0 for r in rates]
    mu, servers, c = inst.mu, inst.servers, inst.cost_rate
    if policy.is_static:
        block_state = policy.cutoff + 1 if policy.static_rate > 0 else 0
    else:
        block_state = m
    sojourn_objective = inst.objective is Objective.SOJOURN

    bt = np.zeros(N_BATCHES)       # time
    bocc = np.zeros(N_BATCHES)     # integral of occupancy dt
    brev = np.zeros(N_BATCHES)
    badm = np.zeros(N_BATCHES)
    bsoj = np.zeros(N_BATCHES)
    bdep = np.zeros(N_BATCHES)
    bblock = np.zeros(N_BATCHES)

    rng = stream(seed)
    buf = rng.random(1 << 16)
    ptr = 0

    def draw() -> float:
        nonlocal buf, ptr
        if ptr == len(buf):
            buf = rng.random(1 << 16)
            ptr = 0
        u = buf[ptr]
        ptr += 1
        return u

    state = 0
    now = 0.0
    waiting: list[float] = []  # arrival times, in arrival order
    max_occ = 0
    admitted = departed = 0
    events = 0
    span = horizon_events - warmup

    for e in range(horizon_events):
        lam = rates[state] if state < m else 0.0
        busy = min(state, servers)
        death = mu * busy
        total = lam + death
        if total <= 0.0:
            break  # absorbed: nobody arrives and nobody is in service
        dt = -math.log(1.0 - draw()) / total
        if e >= warmup:
            b = (e - warmup) * N_BATCHES // span
            bt[b] += dt
            bocc[b] += state * dt
            if state == block_state:
                bblock[b] += dt
        now += dt
        if draw() * total < lam:
            if e >= warmup:
                badm[b] += 1
                brev[b] += prices[state]
            admitted += 1
            waiting.append(now)
            state += 1
            if state > max_occ:
                max_occ = state
        else:
            k = 0 if busy == 1 else int(draw() * busy)
            arr = waiting.pop(k)
            if e >= warmup:
                bdep[b] += 1
                bsoj[b] += now - arr
            departed += 1
            state -= 1
        events += 1

    with np.errstate(invalid="ignore", divide="ignore"):
        r_b = np.where(bt > 0, brev / bt, np.nan)
        el_b = np.where(bt > 0, bocc / bt, np.nan)
        lt_b = np.where(bt > 0, badm / bt, np.nan)
        blk_b = np.where(bt > 0, bblock / bt, np.nan)
        ew_b = np.where(bdep > 0, bsoj / bdep, np.nan)
        cost_b = c * ew_b if sojourn_objective else c * el_b
        z_b = r_b - cost_b

    fields = {
        "revenue": _mean_hw(r_b),
        "cost": _mean_hw(cost_b),
        "objective_value": _mean_hw(z_b),
        "avg_rate": _mean_hw(lt_b),
        "expected_number": _mean_hw(el_b),
        "expected_sojourn": _mean_hw(ew_b),
        "blocking_prob": _mean_hw(blk_b),
    }
    estimates = PolicyMetrics(**{k: v[0] for k, v in fields.items()})
    half_widths = PolicyMetrics(**{k: v[1] for k, v in fields.items()})
    return SimResult(
        estimates=estimates,
        half_widths=half_widths,
        events_processed=events,
        seed=seed,
        max_occupancy=max_occ,
        admitted=admitted,
        departed=departed,
        in_system=len(waiting),
    )


def z_scores(analytic: PolicyMetrics, sim: SimResult) -> dict:
    """Standardized gap between each analytic metric and its simulated mean."""
    out = {}
    for name in (
        "revenue",
        "cost",
        "objective_value",
        "avg_rate",
        "expected_number",
        "expected_sojourn",
        "blocking_prob",
    ):
        an = getattr(analytic, name)
        mean = getattr(sim.estimates, name)
        hw = getattr(sim.half_widths, name)
        if math.isnan(an) or math.isnan(mean) or math.isnan(hw):
            continue
        se = hw / _CRIT
        if se == 0.0:
            out[name] = 0.0 if abs(an - mean) <= 1e-9 * max(1.0, abs(an)) else math.inf
        else:
            out[name] = (an - mean) / se
    return out


def compare_to_analytic(
    policy: Policy, inst: QueueInstance, horizon_events: int, seed: int
) -> SimCheck:
    """Simulate and test whether every analytic metric sits within 4 sigma."""
    sim = simulate(policy, inst, horizon_events, seed)
    zs = z_scores(metrics(policy, inst), sim)
    max_z = max((abs(v) for v in zs.values()), default=0.0)
    return SimCheck(max_z_score=max_z, passed=bool(max_z <= 4.0), z_scores=zs)
