"""Command-line interface.

Subcommands:
    solve       optimal dynamic policy for one instance (vi or direct)
    static      jointly optimized static threshold policy for one instance
    guarantees  guarantee-constant grid as CSV/JSON
    tables      benchmark table replication over random instances
    tightness   worst-case family sweep (and hard sojourn cases)
    simulate    Monte Carlo run of one policy with confidence intervals
"""

from __future__ import annotations

import argparse
import json
import sys

from . import bench
from .demand import DemandFamily, DemandModel, Objective, QueueInstance, demand_to_json
from .dynamic import SolverConfig, solve_direct, solve_occupancy_vi
from .markov import Policy, metrics
from .sim import simulate
from .static_policy import guarantee_bundle, make_static, optimal_static


def _add_instance_args(p: argparse.ArgumentParser):
    p.add_argument("--family", choices=[f.value for f in DemandFamily], default="linear")
    p.add_argument("--a", type=float, default=1.0, help="price sensitivity")
    p.add_argument("--b", type=float, default=2.0, help="market size (rate at price 0)")
    p.add_argument("--p0", type=float, default=0.0, help="logistic midpoint price")
    p.add_argument("--mu", type=float, default=1.0, help="per-server service rate")
    p.add_argument("--servers", type=int, default=1)
    p.add_argument("--cost-rate", type=float, default=1.0)
    p.add_argument(
        "--objective", choices=[o.value for o in Objective], default="occupancy"
    )


def _instance(args) -> QueueInstance:
    demand = DemandModel(family=DemandFamily(args.family), a=args.a, b=args.b, p0=args.p0)
    return QueueInstance(
        demand=demand,
        mu=args.mu,
        servers=args.servers,
        cost_rate=args.cost_rate,
        objective=Objective(args.objective),
    )


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qpricer")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--reps", type=int, default=200)
    parser.add_argument("--out", default=None)
    parser.add_argument("--format", choices=["csv", "json"], default="csv")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="optimal dynamic policy")
    _add_instance_args(p)
    p.add_argument("--method", choices=["vi", "direct"], default="direct")
    p.add_argument("--tail-mass", type=float, default=1e-4)
    p.add_argument("--restarts", type=int, default=8)

    p = sub.add_parser("static", help="optimal static threshold policy")
    _add_instance_args(p)
    p.add_argument("--gamma-max", type=int, default=64)
    p.add_argument("--rate-grid", type=int, default=1024)

    p = sub.add_parser("guarantees", help="guarantee-constant grid")
    p.add_argument("--servers", type=int, default=1)
    p.add_argument("--gamma-max", type=int, default=16)

    p = sub.add_parser("tables", help="replicate a benchmark table")
    p.add_argument("--table", type=int, choices=[1, 2, 3, 4], required=True)
    p.add_argument("--families", default="linear,exponential,logistic")
    p.add_argument("--servers-list", default="1,3,5,10")
    p.add_argument("--gamma-max", type=int, default=64)
    p.add_argument("--restarts", type=int, default=6)

    p = sub.add_parser("tightness", help="worst-case family sweep")
    p.add_argument("--kappa", type=float, default=1.5)
    p.add_argument("--a-values", default="10,100,1000,10000,100000,1000000")
    p.add_argument("--unthresholded-at", type=float, default=None,
                   help="also compare thresholded vs unthresholded statics at this a")
    p.add_argument("--sojourn-examples", action="store_true",
                   help="emit the hard sojourn-penalty cases instead of the sweep")

    p = sub.add_parser("simulate", help="Monte Carlo validation of one policy")
    _add_instance_args(p)
    p.add_argument("--rate", type=float, default=None, help="static policy rate")
    p.add_argument("--cutoff", type=int, default=0, help="static policy cutoff")
    p.add_argument("--rates", default=None, help="comma-separated dynamic rate vector")
    p.add_argument("--events", type=int, default=100_000)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "solve":
        inst = _instance(args)
        cfg = SolverConfig(tail_mass=args.tail_mass, restarts=args.restarts, seed=args.seed)
        if args.method == "vi":
            if inst.objective is not Objective.OCCUPANCY:
                print("solve --method vi supports the occupancy objective only; "
                      "use --method direct", file=sys.stderr)
                return 2
            result = solve_occupancy_vi(inst, cfg)
        else:
            result = solve_direct(inst, cfg)
        payload = result.to_dict()
        payload["demand"] = json.loads(demand_to_json(inst.demand))
        _emit(json.dumps(payload, indent=2) + "\n", args.out)
        return 0

    if args.command == "static":
        inst = _instance(args)
        policy, m = optimal_static(inst, args.gamma_max, args.rate_grid)
        payload = {
            "rate": policy.static_rate,
            "cutoff": policy.cutoff,
            "metrics": m.to_dict(),
            "demand": json.loads(demand_to_json(inst.demand)),
        }
        _emit(json.dumps(payload, indent=2) + "\n", args.out)
        return 0

    if args.command == "guarantees":
        rows = []
        for gamma in range(max(args.servers - 1, 0), args.gamma_max + 1):
            b = guarantee_bundle(gamma, args.servers)
            rows.append(
                {
                    "C": b.servers,
                    "gamma": b.cutoff,
                    "profit": b.profit_factor,
                    "revenue": b.revenue_factor,
                    "cost": b.cost_factor,
                    "sojourn_revenue": b.sojourn_revenue_factor,
                    "sojourn_cost": b.sojourn_cost_factor,
                }
            )
        _emit(bench.render_report(rows, args.format), args.out)
        return 0

    if args.command == "tables":
        cfg = bench.ExperimentConfig(
            families=tuple(DemandFamily(f) for f in args.families.split(",")),
            servers=tuple(int(s) for s in args.servers_list.split(",")),
            replications=args.reps,
            seed=args.seed,
            gamma_max=args.gamma_max,
            solver=SolverConfig(restarts=args.restarts, seed=args.seed),
        )
        rows = bench.replicate_table(args.table, cfg)
        _emit(bench.render_report(rows, args.format), args.out)
        total = sum(r["n_instances"] for r in rows)
        failures = sum(r["n_resampled"] for r in rows)
        if total and failures / total > 0.01:
            print(f"solver failure rate {failures}/{total} exceeds 1%", file=sys.stderr)
            return 1
        return 0

    if args.command == "tightness":
        if args.sojourn_examples:
            rows = bench.sojourn_counterexamples()
        else:
            a_values = [float(a) for a in args.a_values.split(",")]
            rows = bench.tightness_sweep(args.kappa, a_values)
            if args.unthresholded_at is not None:
                rows.append(bench.threshold_vs_unthresholded(args.kappa, args.unthresholded_at))
        _emit(bench.render_report(rows, args.format), args.out)
        return 0

    if args.command == "simulate":
        inst = _instance(args)
        if args.rates:
            policy = Policy(rates=tuple(float(r) for r in args.rates.split(",")))
        else:
            rate = args.rate if args.rate is not None else inst.demand.b / 2.0
            policy = make_static(rate, args.cutoff)
        result = simulate(policy, inst, args.events, args.seed)
        payload = result.to_dict()
        payload["analytic"] = metrics(policy, inst).to_dict()
        payload["demand"] = json.loads(demand_to_json(inst.demand))
        _emit(json.dumps(payload, indent=2) + "\n", args.out)
        return 0

    return 2


if __name__ == "__main__":
    raise SystemExit(main())
