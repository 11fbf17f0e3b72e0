"""Optimal dynamic and static threshold pricing for M/M/C queues.

Price-sensitive customers arrive as a Poisson process; a policy posts a
(possibly state-dependent) price, inducing a birth-death chain whose
steady-state revenue and congestion determine the objective.  The package
solves for optimal dynamic policies, optimizes static threshold policies,
computes the worst-case guarantee constants that relate the two, and
validates everything against an independent Monte Carlo simulator.
"""

from .demand import (
    DemandFamily,
    DemandModel,
    Objective,
    QueueInstance,
    RegularityReport,
    check_regularity,
    demand_from_json,
    demand_to_json,
    myopic_rate,
    normalize_instance,
    price_at_rate,
    rate_at_price,
    revenue_curve,
    revenue_rate,
)
from .markov import (
    Policy,
    PolicyMetrics,
    StationaryDistribution,
    UnstablePolicyError,
    is_stable,
    metrics,
    sojourn_value,
    stationary_distribution,
    stationary_mm1_truncated,
)
from .dynamic import (
    SolveResult,
    SolverConfig,
    average_arrival_rate,
    solve_direct,
    solve_occupancy_vi,
    verify_monotone,
)
from .static_policy import (
    GuaranteeBundle,
    cost_factor,
    cost_factor_mm1,
    guarantee_bundle,
    make_static,
    optimal_static,
    optimal_static_unthresholded,
    profit_guarantee,
    revenue_guarantee,
    sojourn_guarantees,
    static_value_table,
    tightness_instance,
    tilde_static,
)
from .sim import SimCheck, SimResult, compare_to_analytic, simulate, stream

__version__ = "0.1.0"
