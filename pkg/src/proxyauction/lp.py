"""The configuration LP over bidder-bundle variables and its two solvers.

Variables x[i,S] (bidder i receives bundle S) maximize the weighted welfare
sum(x[i,S] * coef(i,S)) subject to

  * item constraints: for each item j, the mass of bundles containing j is <= 1,
  * bidder constraints: each bidder's total mass is <= 1,
  * nonnegativity.

``solve_exact`` solves the fully materialized LP (one column per bidder per
nonempty bundle). ``solve_column_generation`` keeps a restricted master and
prices new columns with per-bidder demand queries at the current item duals.
Both return an optimal basic solution whose support size is at most n + m, and
both are deterministic: columns are ordered by (bidder, bundle lexicographic)
and the simplex uses Bland's rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .errors import CapacityError, InfeasibleSolutionError, IterationLimitError, ParameterError
from .itemsets import ItemSet
from .simplex import solve_canonical_max
from .valuations import Instance, Valuation

LP_ITEM_CAP = 12
FLOAT_TOL = 1e-9

EXACT = "exact"
FLOAT = "float"


def _tolerance(arithmetic: str):
    if arithmetic == EXACT:
        return Fraction(0)
    if arithmetic == FLOAT:
        return FLOAT_TOL
    raise ParameterError(f"unknown arithmetic mode {arithmetic!r}")


@dataclass(frozen=True)
class Column:
    bidder: int
    bundle: ItemSet
    coef: Fraction


@dataclass
class ConfigLP:
    """Materialized column list for the configuration LP."""

    n: int
    m: int
    columns: tuple[Column, ...]

    def __post_init__(self):
        seen = set()
        for col in self.columns:
            if not col.bundle:
                raise ParameterError("LP columns must have nonempty bundles")
            if not col.bundle.fits_universe(self.m):
                raise ParameterError(f"bundle {col.bundle!r} outside the {self.m}-item universe")
            if not 0 <= col.bidder < self.n:
                raise ParameterError(f"bidder {col.bidder} outside range(0, {self.n})")
            if col.coef < 0:
                raise ParameterError("LP coefficients must be nonnegative")
            key = (col.bidder, col.bundle.mask)
            if key in seen:
                raise ParameterError(f"duplicate column for bidder {col.bidder}, bundle {col.bundle!r}")
            seen.add(key)
        object.__setattr__(
            self,
            "columns",
            tuple(sorted(self.columns, key=lambda c: (c.bidder, c.bundle.lex_key()))),
        )

    def coefficient(self, bidder: int, bundle: ItemSet) -> Optional[Fraction]:
        for col in self.columns:
            if col.bidder == bidder and col.bundle == bundle:
                return col.coef
        return None

    def zero_bidder(self, bidder: int) -> "ConfigLP":
        """Same feasible region with one bidder's objective contribution removed."""
        return ConfigLP(
            self.n,
            self.m,
            tuple(
                Column(c.bidder, c.bundle, Fraction(0) if c.bidder == bidder else c.coef)
                for c in self.columns
            ),
        )


@dataclass
class FractionalSolution:
    """Sparse feasible point of the configuration LP, with optional duals."""

    n: int
    m: int
    entries: dict  # (bidder, ItemSet) -> value
    objective: object
    item_duals: Optional[tuple] = None
    bidder_duals: Optional[tuple] = None
    arithmetic: str = EXACT

    def support(self) -> list:
        """Sorted (bidder, bundle, x) triples with positive mass."""
        out = [
            (i, bundle, x)
            for (i, bundle), x in self.entries.items()
            if x > 0
        ]
        out.sort(key=lambda t: (t[0], t[1].lex_key()))
        return out

    def bundles_of(self, bidder: int) -> list:
        return [(bundle, x) for (i, bundle, x) in self.support() if i == bidder]

    def bidder_mass(self, bidder: int):
        total = Fraction(0) if self.arithmetic == EXACT else 0.0
        for (i, _), x in self.entries.items():
            if i == bidder:
                total += x
        return total

    def item_load(self, j: int):
        total = Fraction(0) if self.arithmetic == EXACT else 0.0
        for (_, bundle), x in self.entries.items():
            if j in bundle:
                total += x
        return total


@dataclass
class FeasibilityReport:
    ok: bool
    violations: list = field(default_factory=list)


def build_full_lp(
    instance: Instance,
    valuations: Optional[Sequence[Valuation]] = None,
    *,
    item_cap: int = LP_ITEM_CAP,
) -> ConfigLP:
    """One column per bidder per nonempty bundle, coefficients by value query.

    ``valuations`` defaults to the instance's raw valuations; pass proxies to
    build the proxy-objective LP.
    """
    vals = tuple(valuations) if valuations is not None else instance.valuations
    if len(vals) != instance.n:
        raise ParameterError("need exactly one valuation per bidder")
    if instance.m > item_cap:
        raise CapacityError("full LP column enumeration", 1 << instance.m, 1 << item_cap)
    columns = []
    for i, v in enumerate(vals):
        for mask in range(1, 1 << instance.m):
            bundle = ItemSet(mask)
            columns.append(Column(i, bundle, v.value(bundle)))
    return ConfigLP(instance.n, instance.m, tuple(columns))


def _solve_columns(lp_cols: Sequence[Column], n: int, m: int, arithmetic: str):
    # Rows are ordered bidder constraints first, then item constraints: on
    # degenerate ratio-test ties Bland then retires bidder slacks first, which
    # keeps gratuitous weight off the item duals and lets demand-query pricing
    # terminate without spurious rounds.
    tol = _tolerance(arithmetic)
    if arithmetic == EXACT:
        conv = Fraction
        one = Fraction(1)
        zero = Fraction(0)
        max_pivots = None
    else:
        conv = float
        one = 1.0
        zero = 0.0
        max_pivots = 200 * (n + m + len(lp_cols) + 10)
    n_rows = m + n
    columns = []
    objective = []
    for col in lp_cols:
        vec = [zero] * n_rows
        vec[col.bidder] = one
        for j in col.bundle:
            vec[n + j] = one
        columns.append(vec)
        objective.append(conv(col.coef))
    rhs = [one] * n_rows
    return solve_canonical_max(columns, objective, rhs, tol=tol, max_pivots=max_pivots)


def solve_exact(lp: ConfigLP, *, arithmetic: str = EXACT) -> FractionalSolution:
    """Optimal basic solution of the full LP, with duals.

    In exact mode the result is certified against its own dual solution
    (feasibility, dual feasibility over every column, and complementary
    slackness) before it is returned.
    """
    res = _solve_columns(lp.columns, lp.n, lp.m, arithmetic)
    tol = _tolerance(arithmetic)
    entries = {}
    for col, x in zip(lp.columns, res.x):
        if x > tol:
            entries[(col.bidder, col.bundle)] = x
    sol = FractionalSolution(
        n=lp.n,
        m=lp.m,
        entries=entries,
        objective=res.objective,
        item_duals=tuple(res.duals[lp.n :]),
        bidder_duals=tuple(res.duals[: lp.n]),
        arithmetic=arithmetic,
    )
    if arithmetic == EXACT:
        certify_optimal(lp, sol)
    return sol


def certify_optimal(lp: ConfigLP, sol: FractionalSolution) -> None:
    """Assert optimality via exact duals; raises InfeasibleSolutionError otherwise.

    Checks: primal feasibility, nonnegative duals, no column with positive
    reduced cost, complementary slackness on both primal support and binding
    duals, and that the primal and dual objectives coincide.
    """
    report = check_feasibility(sol, lp.n, lp.m, lp=lp)
    if not report.ok:
        raise InfeasibleSolutionError("; ".join(report.violations))
    y, u = sol.item_duals, sol.bidder_duals
    if y is None or u is None:
        raise InfeasibleSolutionError("solution carries no duals to certify against")
    if any(d < 0 for d in y) or any(d < 0 for d in u):
        raise InfeasibleSolutionError("negative dual multiplier")
    for col in lp.columns:
        reduced = col.coef - sum(y[j] for j in col.bundle) - u[col.bidder]
        if reduced > 0:
            raise InfeasibleSolutionError(
                f"column (bidder {col.bidder}, {col.bundle!r}) has positive reduced cost {reduced}"
            )
        if sol.entries.get((col.bidder, col.bundle), Fraction(0)) > 0 and reduced != 0:
            raise InfeasibleSolutionError(
                f"support column (bidder {col.bidder}, {col.bundle!r}) not tight: {reduced}"
            )
    for j, d in enumerate(y):
        if d > 0 and sol.item_load(j) != 1:
            raise InfeasibleSolutionError(f"item {j} dual positive but constraint slack")
    for i, d in enumerate(u):
        if d > 0 and sol.bidder_mass(i) != 1:
            raise InfeasibleSolutionError(f"bidder {i} dual positive but constraint slack")
    dual_value = sum(y) + sum(u)
    if dual_value != sol.objective:
        raise InfeasibleSolutionError(
            f"dual objective {dual_value} differs from primal {sol.objective}"
        )


def solve_column_generation(
    instance: Instance,
    oracles: Sequence[Valuation],
    start_columns: Iterable[tuple[int, ItemSet]] = (),
    *,
    arithmetic: str = EXACT,
    max_rounds: Optional[int] = None,
) -> FractionalSolution:
    """Restricted-master simplex with demand-query pricing.

    ``oracles[i]`` answers value and demand queries for bidder i's objective
    (typically a proxy valuation). Each round solves the restricted master,
    then asks every bidder for a profit-maximizing bundle at the item duals;
    a bidder's answer enters the master when its reduced cost (against the
    bidder dual) is positive. Terminates when no bidder can improve, which
    certifies optimality over all 2^m - 1 bundles per bidder.
    """
    n, m = instance.n, instance.m
    if len(oracles) != n:
        raise ParameterError("need one demand oracle per bidder")
    if max_rounds is None:
        max_rounds = 10 * (n + m) * (1 << m)
    tol = _tolerance(arithmetic)

    master: list[Column] = []
    have = set()
    for bidder, bundle in start_columns:
        if bundle and (bidder, bundle.mask) not in have:
            master.append(Column(bidder, bundle, oracles[bidder].value(bundle)))
            have.add((bidder, bundle.mask))

    rounds = 0
    while True:
        rounds += 1
        if rounds > max_rounds:
            lp = ConfigLP(n, m, tuple(master))
            res = _solve_columns(lp.columns, n, m, arithmetic)
            raise IterationLimitError(rounds, len(master), res.objective)
        lp = ConfigLP(n, m, tuple(master))
        res = _solve_columns(lp.columns, n, m, arithmetic)
        u = res.duals[:n]
        y = res.duals[n:]
        added = False
        for i in range(n):
            bundle = oracles[i].demand(y)
            if not bundle or (i, bundle.mask) in have:
                continue
            coef = oracles[i].value(bundle)
            reduced = coef - sum(y[j] for j in bundle) - u[i]
            if reduced > tol:
                master.append(Column(i, bundle, coef))
                have.add((i, bundle.mask))
                added = True
        if not added:
            entries = {}
            for col, x in zip(lp.columns, res.x):
                if x > tol:
                    entries[(col.bidder, col.bundle)] = x
            return FractionalSolution(
                n=n,
                m=m,
                entries=entries,
                objective=res.objective,
                item_duals=tuple(y),
                bidder_duals=tuple(u),
                arithmetic=arithmetic,
            )


def check_feasibility(
    sol: FractionalSolution,
    n: int,
    m: int,
    *,
    lp: Optional[ConfigLP] = None,
) -> FeasibilityReport:
    """Verify nonnegativity, item constraints, and bidder constraints exactly.

    When ``lp`` is given, also checks that the stated objective matches the
    entry-weighted coefficient sum.
    """
    violations = []
    slack = 0 if sol.arithmetic == EXACT else FLOAT_TOL
    for (i, bundle), x in sol.entries.items():
        if x < -slack:
            violations.append(f"x[{i},{bundle!r}] = {x} is negative")
        if not bundle.fits_universe(m):
            violations.append(f"bundle {bundle!r} outside the {m}-item universe")
        if not 0 <= i < n:
            violations.append(f"bidder {i} outside range(0, {n})")
    for j in range(m):
        load = sol.item_load(j)
        if load > 1 + slack:
            violations.append(f"item {j} over-allocated: total mass {load}")
    for i in range(n):
        mass = sol.bidder_mass(i)
        if mass > 1 + slack:
            violations.append(f"bidder {i} over-allocated: total mass {mass}")
    if lp is not None:
        total = Fraction(0) if sol.arithmetic == EXACT else 0.0
        coefs = {(c.bidder, c.bundle.mask): c.coef for c in lp.columns}
        for (i, bundle), x in sol.entries.items():
            coef = coefs.get((i, bundle.mask))
            if coef is None:
                violations.append(f"entry (bidder {i}, {bundle!r}) has no LP column")
            else:
                total += x * (coef if sol.arithmetic == EXACT else float(coef))
        if sol.arithmetic == EXACT:
            if total != sol.objective:
                violations.append(f"objective {sol.objective} != entry sum {total}")
        elif abs(total - sol.objective) > FLOAT_TOL * (1 + abs(total)):
            violations.append(f"objective {sol.objective} != entry sum {total}")
    return FeasibilityReport(ok=not violations, violations=violations)
