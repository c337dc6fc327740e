"""Truthful-in-expectation combinatorial auction mechanism toolkit.

The pipeline: wrap each bidder valuation in a keep-probability proxy, solve
the configuration LP over the proxies (exactly, in rational arithmetic),
round the fractional solution by tentative draws, a halting test, per-item
lotteries, and per-bidder survival filtering, and charge expected-externality
payments over the LP range. The verify module certifies the construction's
exact probabilistic identities by brute-force enumeration of the outcome law.
"""

from .errors import (
    AuctionError,
    CapacityError,
    ContractViolationError,
    FormatError,
    InfeasibleSolutionError,
    IterationLimitError,
    MalformedValuationError,
    ParameterError,
)
from .itemsets import EMPTY_SET, ItemSet
from .lp import (
    ConfigLP,
    FractionalSolution,
    build_full_lp,
    check_feasibility,
    certify_optimal,
    solve_column_generation,
    solve_exact,
)
from .mechanism import (
    MechanismConfig,
    Outcome,
    Pipeline,
    Q_HALT,
    Q_OWN_ITEMS,
    TentativeAssignment,
    compute_q,
    default_params,
    halt_check,
    item_lottery,
    personal_cancel,
    realized_welfare,
    run,
    tentative_draw,
    vcg_payments,
)
from .valuations import (
    AdditiveValuation,
    CoverageValuation,
    ExplicitValuation,
    Instance,
    ProxyValuation,
    QueryCounter,
    UnitDemandValuation,
    Valuation,
    XOSValuation,
    is_monotone_normalized,
    is_subadditive,
)
from .verify import (
    CheckResult,
    OutcomeDistribution,
    check_approximation,
    check_halt_frequency,
    check_keep_marginals,
    check_lp_agreement,
    check_monte_carlo,
    check_proxy_bound,
    check_truthfulness,
    check_welfare_identity,
    enumerate_vertex_optimum,
    exact_distribution,
    misreport_family,
    optimal_integral_welfare,
)

__version__ = "0.1.0"
