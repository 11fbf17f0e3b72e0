"""Experiment harness: instance sampling, table replication, report writing.

Instances are drawn with a ~ U[0.1, 5], b ~ U[0.5, 10] (p0 ~ U[0, 20] for
logistic), mu = cost_rate = 1; linear draws with a > b cannot sell profitably
and are rejected and resampled.  For each instance the harness solves the
dynamic optimum directly, evaluates the jointly-optimized static policy and
the average-rate-matched static policy, and aggregates worst-case or average
approximation ratios per (family, servers) cell.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .demand import DemandFamily, DemandModel, Objective, QueueInstance
from .dynamic import SolverConfig, solve_direct
from .markov import metrics
from .static_policy import (
    make_static,
    optimal_static,
    optimal_static_unthresholded,
    tilde_static,
    tightness_instance,
)

__all__ = [
    "ExperimentConfig",
    "RatioRow",
    "sample_instance",
    "run_cells",
    "replicate_table",
    "aggregate_rows",
    "tightness_sweep",
    "sojourn_counterexamples",
    "write_report",
    "render_report",
]

ALL_FAMILIES = (DemandFamily.LINEAR, DemandFamily.EXPONENTIAL, DemandFamily.LOGISTIC)
EXCLUDE_EPS = 1e-12  # instances whose optimal value is 0 carry no ratio information


@dataclass(frozen=True)
class ExperimentConfig:
    families: tuple = ALL_FAMILIES
    servers: tuple = (1, 3, 5, 10)
    replications: int = 200
    seed: int = 0
    objective: Objective = Objective.OCCUPANCY
    output_path: str | None = None
    format: str = "csv"
    gamma_max: int = 64
    rate_grid: int = 1024
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(restarts=6))

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if self.format not in ("csv", "json"):
            raise ValueError("format must be csv or json")


@dataclass(frozen=True)
class RatioRow:
    family: str
    servers: int
    index: int
    z_star: float
    excluded: bool
    obj_ratio_opt: float
    rev_ratio_opt: float
    cost_ratio_opt: float
    obj_ratio_tilde: float
    rev_ratio_tilde: float
    cost_ratio_tilde: float
    opt_cutoff: int
    tilde_cutoff: int
    resamples: int


def sample_instance(
    family: DemandFamily,
    servers: int,
    rng: np.random.Generator,
    objective: Objective = Objective.OCCUPANCY,
) -> QueueInstance:
    """One random instance at mu = cost_rate = 1; linear a > b draws resample."""
    while True:
        a = rng.uniform(0.1, 5.0)
        b = rng.uniform(0.5, 10.0)
        if family is DemandFamily.LINEAR and a > b:
            continue
        p0 = rng.uniform(0.0, 20.0) if family is DemandFamily.LOGISTIC else 0.0
        demand = DemandModel(family=family, a=a, b=b, p0=p0)
        return QueueInstance(demand=demand, mu=1.0, servers=servers, cost_rate=1.0,
                             objective=objective)


def _safe_ratio(num: float, den: float) -> float:
    return num / den if den != 0 else math.nan


def _one_row(
    family: DemandFamily, servers: int, index: int, cfg: ExperimentConfig
) -> RatioRow:
    # per-replicate substream keyed on (family, servers, replicate)
    ss = np.random.SeedSequence(
        entropy=cfg.seed, spawn_key=(list(ALL_FAMILIES).index(family), servers, index)
    )
    rng = np.random.Generator(np.random.Philox(ss))
    resamples = 0
    while True:
        inst = sample_instance(family, servers, rng, cfg.objective)
        result = solve_direct(inst, cfg.solver)
        if result.converged:
            break
        resamples += 1
        if resamples > 20:
            break  # keep the last attempt; counted in the report
    z_star = result.metrics.objective_value
    p_opt, m_opt = optimal_static(inst, cfg.gamma_max, cfg.rate_grid)
    p_tilde, m_tilde = tilde_static(inst, result, cfg.gamma_max)
    excluded = abs(z_star) <= EXCLUDE_EPS
    return RatioRow(
        family=family.value,
        servers=servers,
        index=index,
        z_star=z_star,
        excluded=excluded,
        obj_ratio_opt=_safe_ratio(m_opt.objective_value, z_star),
        rev_ratio_opt=_safe_ratio(m_opt.revenue, result.metrics.revenue),
        cost_ratio_opt=_safe_ratio(m_opt.cost, result.metrics.cost),
        obj_ratio_tilde=_safe_ratio(m_tilde.objective_value, z_star),
        rev_ratio_tilde=_safe_ratio(m_tilde.revenue, result.metrics.revenue),
        cost_ratio_tilde=_safe_ratio(m_tilde.cost, result.metrics.cost),
        opt_cutoff=p_opt.cutoff,
        tilde_cutoff=p_tilde.cutoff if p_tilde.cutoff is not None else -1,
        resamples=resamples,
    )


def run_cells(cfg: ExperimentConfig) -> list[RatioRow]:
    """Per-instance ratio rows for every (family, servers, replicate) triple."""
    rows = []
    for family in cfg.families:
        for servers in cfg.servers:
            for index in range(cfg.replications):
                rows.append(_one_row(family, servers, index, cfg))
    return rows


_RATIO_FIELDS = (
    "obj_ratio_opt",
    "rev_ratio_opt",
    "cost_ratio_opt",
    "obj_ratio_tilde",
    "rev_ratio_tilde",
    "cost_ratio_tilde",
)


def aggregate_rows(rows: list[RatioRow], how: str) -> list[dict]:
    """Collapse per-instance rows into per-cell statistics.

    how = "worst" takes the least favorable ratio per column (min for
    objective/revenue, max for cost); how = "average" takes means.  Rows
    whose optimal value is 0 are excluded from the statistics but counted.
    """
    if how not in ("worst", "average"):
        raise ValueError("how must be 'worst' or 'average'")
    cells: dict[tuple, list[RatioRow]] = {}
    for row in rows:
        cells.setdefault((row.family, row.servers), []).append(row)
    out = []
    for (family, servers), cell_rows in sorted(cells.items()):
        usable = [r for r in cell_rows if not r.excluded]
        rec = {
            "family": family,
            "servers": servers,
            "n_instances": len(cell_rows),
            "n_excluded": len(cell_rows) - len(usable),
            "n_resampled": sum(r.resamples for r in cell_rows),
        }
        for name in _RATIO_FIELDS:
            vals = np.array([getattr(r, name) for r in usable], dtype=float)
            vals = vals[~np.isnan(vals)]
            if len(vals) == 0:
                rec[name] = math.nan
            elif how == "average":
                rec[name] = float(vals.mean())
            elif name.startswith("cost"):
                rec[name] = float(vals.max())
            else:
                rec[name] = float(vals.min())
        out.append(rec)
    return out


def replicate_table(table: int, cfg: ExperimentConfig) -> list[dict]:
    """Aggregated rows for one of the four benchmark tables.

    Tables 1/2 use the occupancy penalty, 3/4 the sojourn penalty; odd tables
    report worst-case ratios, even tables report averages.
    """
    if table not in (1, 2, 3, 4):
        raise ValueError("table must be 1, 2, 3, or 4")
    objective = Objective.OCCUPANCY if table in (1, 2) else Objective.SOJOURN
    how = "worst" if table in (1, 3) else "average"
    rows = run_cells(replace(cfg, objective=objective))
    agg = aggregate_rows(rows, how)
    for rec in agg:
        rec["table"] = table
    return agg


# ---------------------------------------------------------------------------
# tightness sweeps and hard sojourn cases
# ---------------------------------------------------------------------------

def tightness_optimum(kappa: float, a: float) -> tuple[float, float]:
    """(optimal rate, optimal value) of the worst-case family, closed form.

    The dynamic optimum blocks at occupancy 1 with rate sqrt(b - a + 1) - 1.
    """
    b = kappa * a
    lam = math.sqrt(b - a + 1.0) - 1.0
    z = lam * (b - lam - a) / (a * (1.0 + lam))
    return lam, z


def tightness_sweep(kappa: float, a_values) -> list[dict]:
    """Ratio of the rate-matched static value to the optimum as a grows.

    The optimum comes from the closed form; the static value is evaluated
    numerically through the chain analysis.  The ratio falls toward 1/2 from
    above as the price scale a increases.
    """
    if not (1.0 < kappa < 2.0):
        raise ValueError("kappa must lie in (1, 2)")
    rows = []
    for a in a_values:
        inst = tightness_instance(kappa, a)
        lam_star, z_star = tightness_optimum(kappa, a)
        lam_tilde = lam_star / (1.0 + lam_star)
        z_static = metrics(make_static(lam_tilde, 0), inst).objective_value
        rows.append(
            {
                "a": float(a),
                "z_star": z_star,
                "z_static": z_static,
                "ratio": z_static / z_star,
            }
        )
    return rows


def threshold_vs_unthresholded(kappa: float, a: float, gamma_max: int = 64) -> dict:
    """Best thresholded static value vs best threshold-free static value."""
    inst = tightness_instance(kappa, a)
    _, m_thr = optimal_static(inst, gamma_max=gamma_max, rate_grid=2048)
    rate_u, z_u = optimal_static_unthresholded(inst)
    return {
        "a": float(a),
        "kappa": float(kappa),
        "z_thresholded": m_thr.objective_value,
        "z_unthresholded": z_u,
        "unthresholded_rate": rate_u,
        "ratio": z_u / m_thr.objective_value,
    }


def sojourn_counterexamples(solver: SolverConfig | None = None) -> list[dict]:
    """Two single-server cases where static cutoff pricing fails badly under
    the sojourn penalty: a linear case where the rate-matched static goes
    negative, and an exponential case where even the best static cutoff
    policy recovers a tiny fraction of the optimum."""
    solver = solver or SolverConfig(restarts=8)
    rows = []

    linear = QueueInstance(
        demand=DemandModel(DemandFamily.LINEAR, a=5000.0, b=6000.0),
        objective=Objective.SOJOURN,
    )
    res = solve_direct(linear, solver)
    _, tilde_metrics = tilde_static(linear, res, gamma_max=0)
    rows.append(
        {
            "case": "linear_a5000_b6000",
            "z_dynamic": res.metrics.objective_value,
            "z_static": tilde_metrics.objective_value,
            "ratio": tilde_metrics.objective_value / res.metrics.objective_value,
        }
    )

    expo = QueueInstance(
        demand=DemandModel(DemandFamily.EXPONENTIAL, a=0.463, b=2.0),
        objective=Objective.SOJOURN,
    )
    res = solve_direct(expo, solver)
    _, opt_metrics = optimal_static(expo, gamma_max=64, rate_grid=2048)
    rows.append(
        {
            "case": "exponential_a0.463_b2",
            "z_dynamic": res.metrics.objective_value,
            "z_static": opt_metrics.objective_value,
            "ratio": opt_metrics.objective_value / res.metrics.objective_value,
        }
    )
    return rows


# ---------------------------------------------------------------------------
# report writing
# ---------------------------------------------------------------------------

def render_report(rows: list[dict], fmt: str) -> str:
    """Rows to CSV (12 significant digits) or a JSON array, deterministically."""
    if not rows:
        raise ValueError("rows must be nonempty")
    if fmt == "json":
        return json.dumps(rows, indent=2, sort_keys=False) + "\n"
    if fmt != "csv":
        raise ValueError("format must be csv or json")
    header = list(rows[0].keys())
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(
            [f"{v:.12g}" if isinstance(v, float) else v for v in (row[k] for k in header)]
        )
    return buf.getvalue()


def write_report(rows: list[dict], cfg: ExperimentConfig) -> str:
    """Write rows to cfg.output_path in cfg.format; returns the path."""
    if cfg.output_path is None:
        raise ValueError("cfg.output_path is required")
    text = render_report(rows, cfg.format)
    with open(cfg.output_path, "w") as fh:
        fh.write(text)
    return cfg.output_path
