"""The randomized allocation mechanism and its payment rule.

Pipeline for one run, given an instance and a configuration (c, p, seed):

  1. wrap each valuation in its keep-probability proxy (ProxyValuation),
  2. solve the configuration LP over the proxy objectives,
  3. draw one tentative bundle per bidder (bundle S with probability x[i,S],
     the empty bundle with the residual mass),
  4. halt if any item is tentatively held by more than 1/c bidders; a halted
     run allocates nothing,
  5. per bidder, compute q_i: the probability that the halting event would
     fire given the bidder's own tentative bundle, under a fresh independent
     draw of everybody else (see the two variants below),
  6. per item, at most one tentative holder receives it, each with
     probability exactly c,
  7. per bidder, the received items survive with probability p/(1 - q_i),
     otherwise the bidder gets nothing.

q variants. "halt" (the default) lets q_i be the probability that the step-4
halt test fires anywhere, given bidder i's bundle; with it the probability
that bidder i draws S and survives through step 7 is exactly p * x[i,S],
which is what the welfare identity and truthfulness rest on. "own-items"
restricts the event to over-allocation among the items of the bidder's own
bundle; it ignores halts caused elsewhere, so survival falls short of
p * x[i,S] on overlapping instances. The verifier quantifies the gap.

Cancellation requires q_i <= 1 - p. Violations raise ParameterError rather
than clamping, since clamping would silently void the survival identity.

Payments are the deterministic expected externality over the LP range:
charge_i = p * (opt of the LP with bidder i's objective zeroed, minus the
other bidders' share of the chosen solution). Together with step 7's exact
survival law this prices the mechanism so that truthful reporting maximizes
every bidder's expected utility.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional, Sequence

from . import rng as rngmod
from .errors import (
    CapacityError,
    ContractViolationError,
    InfeasibleSolutionError,
    ParameterError,
)
from .itemsets import EMPTY_SET, ItemSet
from .lp import (
    EXACT,
    FLOAT,
    ConfigLP,
    FractionalSolution,
    build_full_lp,
    solve_column_generation,
    solve_exact,
)
from .valuations import AdditiveValuation, Instance

Q_HALT = "halt"
Q_OWN_ITEMS = "own-items"
Q_VARIANTS = (Q_HALT, Q_OWN_ITEMS)

SOLVER_FULL = "full"
SOLVER_COLGEN = "column-generation"

ATOM_CAP = 10**7


@dataclass(frozen=True)
class MechanismConfig:
    """Parameters of one mechanism execution.

    c: per-item keep probability, a reciprocal integer in (0, 1].
    p: survival probability of step 7, a rational in (0, 1].
    q_variant: "halt" or "own-items" (see module docstring).
    arithmetic: "exact" (all rationals) or "float" (1e-9 tolerance; excluded
        from the equality-based verification checks).
    seed: master seed; every stage stream is derived from it.
    solver: "full" or "column-generation" for the LP step.
    """

    c: Fraction
    p: Fraction
    q_variant: str = Q_HALT
    arithmetic: str = EXACT
    seed: int = 0
    solver: str = SOLVER_FULL

    def __post_init__(self):
        c, p = Fraction(self.c), Fraction(self.p)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "p", p)
        if not (0 < c <= 1) or c.numerator != 1:
            raise ParameterError(f"c must be a reciprocal integer in (0, 1], got {c}")
        if not (0 < p <= 1):
            raise ParameterError(f"p must lie in (0, 1], got {p}")
        if self.q_variant not in Q_VARIANTS:
            raise ParameterError(f"unknown q variant {self.q_variant!r}")
        if self.arithmetic not in (EXACT, FLOAT):
            raise ParameterError(f"unknown arithmetic mode {self.arithmetic!r}")
        if self.solver not in (SOLVER_FULL, SOLVER_COLGEN):
            raise ParameterError(f"unknown solver {self.solver!r}")
        if not 0 <= int(self.seed) < (1 << 64):
            raise ParameterError("seed must fit in 64 unsigned bits")

    @property
    def inv_c(self) -> int:
        return self.c.denominator

    def semantics(self) -> dict:
        """The interpretation choices active in this configuration."""
        return {
            "empty_outcome_probability": "1-p (p is the survival probability)",
            "q_event_scope": "all items" if self.q_variant == Q_HALT else "own bundle only",
            "cancellation_bound": "q_i <= 1-p enforced, violations raise",
            "c_formula": "log2(log2 m) / (100 log2 m), rounded down to a reciprocal integer",
        }


def default_params(m: int) -> tuple[Fraction, Fraction]:
    """Default (c, p) for an m-item auction: c ~ loglog(m)/(100 log m), p = 1/20.

    c is rounded down to the nearest reciprocal integer so that 1/c is
    integral; values within 1e-9 of an integer reciprocal are treated as
    exact to absorb float noise at powers of two.
    """
    if m < 4:
        raise ParameterError(f"default parameters need m >= 4, got m={m}")
    inv = 100.0 * math.log2(m) / math.log2(math.log2(m))
    nearest = round(inv)
    k = nearest if abs(inv - nearest) < 1e-9 else math.ceil(inv)
    return Fraction(1, k), Fraction(1, 20)


@dataclass(frozen=True)
class TentativeAssignment:
    """One bundle per bidder (possibly empty) plus per-item holder counts."""

    bundles: tuple[ItemSet, ...]
    m: int

    def holder_counts(self) -> list[int]:
        counts = [0] * self.m
        for bundle in self.bundles:
            for j in bundle:
                counts[j] += 1
        return counts

    def holders(self, j: int) -> list[int]:
        return [i for i, bundle in enumerate(self.bundles) if j in bundle]


@dataclass(frozen=True)
class Outcome:
    """Realized result of one mechanism run."""

    halted: bool
    tentative: tuple[ItemSet, ...]
    kept: tuple[ItemSet, ...]
    final: tuple[ItemSet, ...]
    q_values: Optional[tuple] = None
    payments: Optional[tuple] = None

    def __post_init__(self):
        taken = 0
        for bundle in self.final:
            if taken & bundle.mask:
                raise InfeasibleSolutionError("final bundles overlap")
            taken |= bundle.mask


def tentative_draw(
    solution: FractionalSolution, seed: int, *, arithmetic: str = EXACT
) -> TentativeAssignment:
    """Step 3: independent per-bidder draw from the solution's bundle law.

    Bidder i's stream is derived as (seed, "tentative", i), so draws do not
    interact across bidders or with later stages.
    """
    bundles = []
    for i in range(solution.n):
        options = solution.bundles_of(i)
        mass = sum((x for _, x in options), Fraction(0) if arithmetic == EXACT else 0.0)
        if mass > (1 if arithmetic == EXACT else 1 + 1e-9):
            raise InfeasibleSolutionError(f"bidder {i} bundle mass {mass} exceeds 1")
        r = rngmod.stream(seed, "tentative", i)
        pick = rngmod.categorical(r, [x for _, x in options], arithmetic=arithmetic)
        bundles.append(EMPTY_SET if pick is None else options[pick][0])
    return TentativeAssignment(bundles=tuple(bundles), m=solution.m)


def halt_check(t: TentativeAssignment, c: Fraction) -> bool:
    """Step 4 predicate: some item is tentatively held more than 1/c times."""
    inv_c = Fraction(c).denominator
    return any(k > inv_c for k in t.holder_counts())


def compute_q(
    solution: FractionalSolution,
    bidder: int,
    bundle: ItemSet,
    c: Fraction,
    variant: str = Q_HALT,
    *,
    atom_cap: int = ATOM_CAP,
    arithmetic: str = EXACT,
) -> Fraction:
    """Exact probability of the q event for one bidder and tentative bundle.

    Enumerates the product law of all other bidders' tentative draws (each
    support bundle plus the residual empty atom). Under "halt" the event is
    the step-4 halt predicate on the combined assignment (others' draws plus
    this bidder holding ``bundle``) over all items; under "own-items" it is
    restricted to over-allocation of the items inside ``bundle``.
    """
    if variant not in Q_VARIANTS:
        raise ParameterError(f"unknown q variant {variant!r}")
    inv_c = Fraction(c).denominator
    one = Fraction(1) if arithmetic == EXACT else 1.0

    supports = []
    size = 1
    for i in range(solution.n):
        if i == bidder:
            continue
        options = solution.bundles_of(i)
        residual = one - sum(x for _, x in options)
        atoms = [(b.mask, x) for b, x in options]
        if arithmetic == EXACT:
            if residual > 0:
                atoms.append((0, residual))
        elif residual > 1e-12:
            atoms.append((0, residual))
        supports.append(atoms)
        size *= len(atoms)
    if size > atom_cap:
        raise CapacityError("q enumeration over joint draws", size, atom_cap)

    own_mask = bundle.mask
    m = solution.m
    total = one * 0

    def fires(counts: list[int]) -> bool:
        for j in range(m):
            k = counts[j]
            if (own_mask >> j) & 1:
                if k + 1 > inv_c:
                    return True
            elif variant == Q_HALT and k > inv_c:
                return True
        return False

    def walk(idx: int, prob, counts: list[int]):
        nonlocal total
        if idx == len(supports):
            if fires(counts):
                total += prob
            return
        for mask, x in supports[idx]:
            rest = mask
            while rest:
                low = rest & -rest
                counts[low.bit_length() - 1] += 1
                rest ^= low
            walk(idx + 1, prob * x, counts)
            rest = mask
            while rest:
                low = rest & -rest
                counts[low.bit_length() - 1] -= 1
                rest ^= low

    walk(0, one, [0] * m)
    return total


def item_lottery(
    t: TentativeAssignment, c: Fraction, seed: int, *, arithmetic: str = EXACT
) -> tuple[ItemSet, ...]:
    """Step 6: per item, one tentative holder receives it with probability c each.

    Requires every holder count to be at most 1/c (the halt check must have
    passed), so the per-item lottery probabilities sum to at most 1. Items
    use independent streams (seed, "lottery", j).
    """
    c = Fraction(c)
    inv_c = c.denominator
    kept_masks = [0] * len(t.bundles)
    prob = c if arithmetic == EXACT else float(c)
    for j in range(t.m):
        holders = t.holders(j)
        if not holders:
            continue
        if len(holders) > inv_c:
            raise ContractViolationError(
                f"item {j} held {len(holders)} > 1/c = {inv_c} times; halt check must run first"
            )
        r = rngmod.stream(seed, "lottery", j)
        pick = rngmod.categorical(r, [prob] * len(holders), arithmetic=arithmetic)
        if pick is not None:
            kept_masks[holders[pick]] |= 1 << j
    return tuple(ItemSet(mask) for mask in kept_masks)


def personal_cancel(
    kept: Sequence[ItemSet],
    q_values: Sequence,
    p: Fraction,
    seed: int,
    *,
    arithmetic: str = EXACT,
) -> tuple[ItemSet, ...]:
    """Step 7: bidder i keeps everything with probability p/(1 - q_i), else nothing."""
    p = Fraction(p)
    final = []
    for i, bundle in enumerate(kept):
        q = q_values[i]
        keep_prob = _survival_probability(q, p, i, arithmetic=arithmetic)
        r = rngmod.stream(seed, "cancel", i)
        if rngmod.bernoulli(r, keep_prob, arithmetic=arithmetic):
            final.append(bundle)
        else:
            final.append(EMPTY_SET)
    return tuple(final)


def _survival_probability(q, p: Fraction, bidder: int, *, arithmetic: str = EXACT):
    if arithmetic == EXACT:
        q = Fraction(q)
        if q > 1 - p:
            raise ParameterError(
                f"bidder {bidder}: cancellation needs q_i <= 1 - p, got q_i = {q} > {1 - p}; "
                f"with default parameters q_i stays below min(p, 1/m)"
            )
        return p / (1 - q)
    if q > 1 - float(p) + 1e-12:
        raise ParameterError(f"bidder {bidder}: cancellation needs q_i <= 1 - p, got q_i = {q}")
    return float(p) / (1.0 - q)


class Pipeline:
    """Prepared mechanism state: proxies, LP solution, and a q cache.

    Preparing once and sampling many times keeps Monte Carlo replications
    cheap; the LP solve and the q values are deterministic functions of the
    instance and configuration, so sharing them does not affect the law.
    """

    def __init__(
        self,
        instance: Instance,
        config: MechanismConfig,
        *,
        solution: Optional[FractionalSolution] = None,
        atom_cap: int = ATOM_CAP,
        proxy_cap: Optional[int] = None,
    ):
        self.instance = instance
        self.config = config
        self.atom_cap = atom_cap
        if proxy_cap is None:
            self.proxies = instance.proxies(config.c)
        else:
            self.proxies = instance.proxies(config.c, subset_cap=proxy_cap)
        self._lp: Optional[ConfigLP] = None
        if solution is None:
            solution = self._solve()
        self.solution = solution
        self._q_cache: dict[tuple[int, int], Fraction] = {}
        self._draw_tables: Optional[list] = None
        self._survival_cache: dict = {}

    def _solve(self) -> FractionalSolution:
        if self.config.solver == SOLVER_COLGEN:
            return solve_column_generation(
                self.instance, self.proxies, arithmetic=self.config.arithmetic
            )
        return solve_exact(self.lp, arithmetic=self.config.arithmetic)

    @property
    def lp(self) -> ConfigLP:
        if self._lp is None:
            self._lp = build_full_lp(self.instance, self.proxies)
        return self._lp

    def q(self, bidder: int, bundle: ItemSet) -> Fraction:
        key = (bidder, bundle.mask)
        got = self._q_cache.get(key)
        if got is None:
            got = self._q_cache[key] = compute_q(
                self.solution,
                bidder,
                bundle,
                self.config.c,
                self.config.q_variant,
                atom_cap=self.atom_cap,
                arithmetic=self.config.arithmetic,
            )
        return got

    def _tentative_tables(self) -> list:
        """Per-bidder draw tables replicating tentative_draw's stream use exactly."""
        if self._draw_tables is None:
            exact = self.config.arithmetic == EXACT
            tables = []
            for i in range(self.instance.n):
                options = self.solution.bundles_of(i)
                bundles = [b for b, _ in options]
                masses = [x for _, x in options]
                total = sum(masses, Fraction(0) if exact else 0.0)
                if total > (1 if exact else 1 + 1e-9):
                    raise InfeasibleSolutionError(f"bidder {i} bundle mass {total} exceeds 1")
                if exact:
                    den = 1
                    for x in masses:
                        den = den * x.denominator // math.gcd(den, x.denominator)
                    acc, cums = 0, []
                    for x in masses:
                        acc += x.numerator * (den // x.denominator)
                        cums.append(acc)
                    tables.append((bundles, den, cums, None))
                else:
                    acc, cums = 0.0, []
                    for x in masses:
                        acc += x
                        cums.append(acc)
                    tables.append((bundles, None, None, cums))
            self._draw_tables = tables
        return self._draw_tables

    def tentative_sample(self, seed: int) -> TentativeAssignment:
        """Step-3 draw from cached tables; stream-identical to tentative_draw."""
        exact = self.config.arithmetic == EXACT
        bundles = []
        for i, (opts, den, cums, fcums) in enumerate(self._tentative_tables()):
            r = rngmod.stream(seed, "tentative", i)
            pick = None
            if exact:
                u = r.randrange(den)
                for k, threshold in enumerate(cums):
                    if u < threshold:
                        pick = k
                        break
            else:
                u = r.random()
                for k, threshold in enumerate(fcums):
                    if u < threshold:
                        pick = k
                        break
            bundles.append(EMPTY_SET if pick is None else opts[pick])
        return TentativeAssignment(bundles=tuple(bundles), m=self.solution.m)

    def _survival_for(self, bidder: int, q) -> object:
        got = self._survival_cache.get(q)
        if got is None:
            got = self._survival_cache[q] = _survival_probability(
                q, self.config.p, bidder, arithmetic=self.config.arithmetic
            )
        return got

    def sample(self, seed: int) -> Outcome:
        """One rounding pass; stream-for-stream identical to the stage functions."""
        n = self.instance.n
        exact = self.config.arithmetic == EXACT
        empty = tuple(EMPTY_SET for _ in range(n))
        t = self.tentative_sample(seed)
        if halt_check(t, self.config.c):
            return Outcome(halted=True, tentative=t.bundles, kept=empty, final=empty)
        q_values = tuple(self.q(i, t.bundles[i]) for i in range(n))

        inv_c = self.config.inv_c
        c_float = float(self.config.c)
        kept_masks = [0] * n
        for j in range(t.m):
            holders = [i for i, b in enumerate(t.bundles) if j in b]
            if not holders:
                continue
            r = rngmod.stream(seed, "lottery", j)
            if exact:
                u = r.randrange(inv_c)
                if u < len(holders):
                    kept_masks[holders[u]] |= 1 << j
            else:
                u, acc = r.random(), 0.0
                for k in range(len(holders)):
                    acc += c_float
                    if u < acc:
                        kept_masks[holders[k]] |= 1 << j
                        break

        final = []
        for i in range(n):
            # the feasibility bound q_i <= 1 - p applies to every bidder
            keep = self._survival_for(i, q_values[i])
            mask = kept_masks[i]
            if mask == 0:
                # both cancel branches leave an empty bundle empty
                final.append(EMPTY_SET)
                continue
            r = rngmod.stream(seed, "cancel", i)
            if exact:
                kept_it = keep == 1 if keep.denominator == 1 else (
                    r.randrange(keep.denominator) < keep.numerator
                )
            else:
                kept_it = r.random() < keep
            final.append(ItemSet(mask) if kept_it else EMPTY_SET)
        return Outcome(
            halted=False,
            tentative=t.bundles,
            kept=tuple(ItemSet(mask) for mask in kept_masks),
            final=tuple(final),
            q_values=q_values,
        )

    def payments(self) -> tuple[Fraction, ...]:
        """Expected externality charges over the LP range; exact mode only."""
        if self.config.arithmetic != EXACT:
            raise ParameterError("payments require exact arithmetic")
        p = self.config.p
        support = self.solution.support()
        charges = []
        for i in range(self.instance.n):
            others_share = sum(
                (x * self.proxies[j].value(bundle) for j, bundle, x in support if j != i),
                Fraction(0),
            )
            opt_without = self._optimum_without(i)
            charge = p * (opt_without - others_share)
            if charge < 0:
                raise ContractViolationError(
                    f"negative charge {charge} for bidder {i}; the zeroed LP cannot "
                    f"be worse than the others' share of the chosen solution"
                )
            charges.append(charge)
        return tuple(charges)

    def _optimum_without(self, bidder: int) -> Fraction:
        if self.config.solver == SOLVER_COLGEN:
            oracles = list(self.proxies)
            oracles[bidder] = AdditiveValuation([Fraction(0)] * self.instance.m)
            sol = solve_column_generation(self.instance, oracles, arithmetic=EXACT)
            return sol.objective
        sol = solve_exact(self.lp.zero_bidder(bidder), arithmetic=EXACT)
        return sol.objective


def run(
    instance: Instance,
    config: MechanismConfig,
    *,
    solution: Optional[FractionalSolution] = None,
    with_payments: bool = False,
) -> Outcome:
    """Execute the full pipeline once, deterministically in (instance, config)."""
    pipeline = Pipeline(instance, config, solution=solution)
    outcome = pipeline.sample(config.seed)
    if with_payments:
        outcome = replace(outcome, payments=pipeline.payments())
    return outcome


def vcg_payments(
    instance: Instance,
    config: MechanismConfig,
    *,
    solution: Optional[FractionalSolution] = None,
) -> tuple[Fraction, ...]:
    """Per-bidder expected charges for the configured mechanism."""
    return Pipeline(instance, config, solution=solution).payments()


def realized_welfare(instance: Instance, outcome: Outcome):
    """Sum of the bidders' true values for their final bundles.

    Evaluated outside the query accounting: this is analysis of a finished
    run, not communication with the bidders.
    """
    return sum(
        (v._value(bundle.mask) for v, bundle in zip(instance.valuations, outcome.final)),
        Fraction(0),
    )
