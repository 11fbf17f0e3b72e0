import json
import math

import numpy as np
import pytest
from scipy.stats import kstest

from qpricer.bench import (
    ExperimentConfig,
    aggregate_rows,
    render_report,
    replicate_table,
    run_cells,
    sample_instance,
    sojourn_counterexamples,
    threshold_vs_unthresholded,
    tightness_optimum,
    tightness_sweep,
    write_report,
)
from qpricer.demand import DemandFamily, Objective
from qpricer.dynamic import SolverConfig
from qpricer.sim import stream
from qpricer.static_policy import (
    cost_factor,
    profit_guarantee,
    revenue_guarantee,
    sojourn_guarantees,
)

TINY = ExperimentConfig(
    families=(DemandFamily.LINEAR, DemandFamily.EXPONENTIAL),
    servers=(1,),
    replications=3,
    seed=123,
    gamma_max=32,
    rate_grid=512,
    solver=SolverConfig(restarts=3, seed=123),
)


def test_sampler_rejects_unprofitable_linear():
    rng = stream(1)
    for _ in range(400):
        inst = sample_instance(DemandFamily.LINEAR, 1, rng)
        assert inst.demand.a <= inst.demand.b


def test_sampler_deterministic_given_seed():
    a = [sample_instance(DemandFamily.LOGISTIC, 2, stream(9, index=i)) for i in range(5)]
    b = [sample_instance(DemandFamily.LOGISTIC, 2, stream(9, index=i)) for i in range(5)]
    assert a == b


def test_sampler_marginal_uniformity():
    rng = stream(4)
    draws = np.array(
        [sample_instance(DemandFamily.EXPONENTIAL, 1, rng).demand.a for _ in range(10_000)]
    )
    stat = kstest(draws, "uniform", args=(0.1, 4.9))
    assert stat.pvalue > 0.01


def test_run_cells_rows_satisfy_guarantee_bounds():
    rows = run_cells(TINY)
    assert len(rows) == 2 * 3
    for row in rows:
        assert row.resamples == 0
        if row.excluded:
            continue
        servers = row.servers
        assert row.obj_ratio_opt >= row.obj_ratio_tilde - 1e-9 or math.isnan(row.obj_ratio_tilde)
        # profit bound applies to the best-cutoff rate-matched policy
        assert row.obj_ratio_tilde >= profit_guarantee(servers) - 1e-6
        gamma = row.tilde_cutoff
        if gamma >= servers - 1:
            assert row.rev_ratio_tilde >= revenue_guarantee(gamma, servers) - 1e-6
            assert row.cost_ratio_tilde <= cost_factor(gamma, servers) + 1e-6


def test_aggregate_worst_vs_average():
    rows = run_cells(TINY)
    worst = aggregate_rows(rows, "worst")
    avg = aggregate_rows(rows, "average")
    for w, a in zip(worst, avg):
        assert w["family"] == a["family"] and w["servers"] == a["servers"]
        if not math.isnan(w["obj_ratio_opt"]):
            assert w["obj_ratio_opt"] <= a["obj_ratio_opt"] + 1e-12
            assert w["cost_ratio_opt"] >= a["cost_ratio_opt"] - 1e-12
    with pytest.raises(ValueError):
        aggregate_rows(rows, "median")


def test_replicate_table_single_replication():
    cfg = ExperimentConfig(
        families=(DemandFamily.LINEAR,),
        servers=(1,),
        replications=1,
        seed=7,
        gamma_max=32,
        rate_grid=512,
        solver=SolverConfig(restarts=3, seed=7),
    )
    rows = replicate_table(1, cfg)
    assert len(rows) == 1
    row = rows[0]
    assert row["table"] == 1
    assert row["n_instances"] == 1
    if row["n_excluded"] == 0:
        assert 0.0 <= row["obj_ratio_opt"] <= 1.0 + 1e-9
    with pytest.raises(ValueError):
        replicate_table(5, cfg)


def test_sojourn_table_uses_sojourn_objective():
    cfg = ExperimentConfig(
        families=(DemandFamily.EXPONENTIAL,),
        servers=(1,),
        replications=2,
        seed=11,
        gamma_max=32,
        rate_grid=512,
        solver=SolverConfig(restarts=3, seed=11),
    )
    rows3 = replicate_table(3, cfg)
    assert rows3[0]["table"] == 3
    # sojourn inflation of the rate-matched policy is bounded by its factor
    raw = run_cells(ExperimentConfig(
        families=(DemandFamily.EXPONENTIAL,),
        servers=(1,),
        replications=2,
        seed=11,
        objective=Objective.SOJOURN,
        gamma_max=32,
        rate_grid=512,
        solver=SolverConfig(restarts=3, seed=11),
    ))
    for row in raw:
        if row.excluded or row.tilde_cutoff < 0:
            continue
        _, soj_factor = sojourn_guarantees(max(row.tilde_cutoff, 0), row.servers)
        assert row.cost_ratio_tilde <= soj_factor + 1e-6


def test_tightness_sweep_values_and_monotonicity():
    a_values = [10.0**k for k in range(1, 7)]
    rows = tightness_sweep(1.5, a_values)
    ratios = [r["ratio"] for r in rows]
    assert all(r2 < r1 for r1, r2 in zip(ratios, ratios[1:]))
    assert 0.5 <= ratios[-1] <= 0.51
    lam, z = tightness_optimum(1.5, 100.0)
    assert lam == pytest.approx(math.sqrt(51.0) - 1.0)
    assert rows[1]["z_star"] == pytest.approx(z)
    with pytest.raises(ValueError):
        tightness_sweep(2.5, a_values)


def test_threshold_vs_unthresholded_reference_point():
    row = threshold_vs_unthresholded(1.05, 1000.0)
    assert row["z_thresholded"] == pytest.approx(0.0377, rel=5e-3)
    assert row["z_unthresholded"] == pytest.approx(0.0006, rel=0.05)
    assert row["ratio"] == pytest.approx(0.016, abs=0.002)


def test_sojourn_counterexamples_reference_points():
    rows = sojourn_counterexamples(SolverConfig(restarts=6))
    linear = rows[0]
    assert linear["z_dynamic"] == pytest.approx(0.17, abs=0.02)
    assert linear["z_static"] == pytest.approx(-0.4, abs=0.05)
    expo = rows[1]
    assert expo["ratio"] == pytest.approx(0.001, abs=0.0005)


def test_render_report_csv_round_trip():
    rows = [
        {"family": "linear", "servers": 1, "x": 0.123456789012345, "n": 3},
        {"family": "exponential", "servers": 2, "x": 1e-7 / 3.0, "n": 4},
    ]
    text = render_report(rows, "csv")
    lines = text.strip().split("\n")
    assert lines[0] == "family,servers,x,n"
    parsed = float(lines[1].split(",")[2])
    assert parsed == pytest.approx(rows[0]["x"], rel=1e-11)
    back = json.loads(render_report(rows, "json"))
    assert back[1]["x"] == rows[1]["x"]
    with pytest.raises(ValueError):
        render_report([], "csv")


def test_write_report_deterministic_bytes(tmp_path):
    cfg1 = ExperimentConfig(
        families=(DemandFamily.LINEAR,),
        servers=(1,),
        replications=10,
        seed=77,
        gamma_max=16,
        rate_grid=256,
        solver=SolverConfig(restarts=2, seed=77),
        output_path=str(tmp_path / "a.csv"),
    )
    rows1 = aggregate_rows(run_cells(cfg1), "average")
    write_report(rows1, cfg1)
    cfg2 = ExperimentConfig(
        families=(DemandFamily.LINEAR,),
        servers=(1,),
        replications=10,
        seed=77,
        gamma_max=16,
        rate_grid=256,
        solver=SolverConfig(restarts=2, seed=77),
        output_path=str(tmp_path / "b.csv"),
    )
    rows2 = aggregate_rows(run_cells(cfg2), "average")
    write_report(rows2, cfg2)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_experiment_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(replications=0)
    with pytest.raises(ValueError):
        ExperimentConfig(format="yaml")
