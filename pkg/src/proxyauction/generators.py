"""Deterministic instance generators and the bundled verification corpora.

All randomness flows through seeds; the same (kind, n, m, seed) always yields
the same instance. Every generated valuation is normalized, non-decreasing,
and subadditive: the structured kinds guarantee this by construction, and
explicit tables are repaired to the greatest monotone subadditive minorant of
the raw random table.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .errors import CapacityError, ParameterError
from .itemsets import ItemSet
from .lp import EXACT, FractionalSolution
from .mechanism import MechanismConfig, Q_HALT
from .rng import derive_seed
from .valuations import (
    AdditiveValuation,
    CoverageValuation,
    ExplicitValuation,
    Instance,
    UnitDemandValuation,
    Valuation,
    XOSValuation,
)

EXPLICIT_ITEM_CAP = 8
GENERATOR_KINDS = ("additive", "unit-demand", "xos", "coverage", "explicit-subadditive", "mixed")

DEFAULT_CORPUS_SEED = 20260810


def _rand_value(rng: random.Random, top: int = 10) -> Fraction:
    return Fraction(rng.randint(0, top), rng.choice((1, 1, 2, 4)))


def _additive(m: int, rng: random.Random) -> AdditiveValuation:
    return AdditiveValuation([_rand_value(rng) for _ in range(m)])


def _unit_demand(m: int, rng: random.Random) -> UnitDemandValuation:
    return UnitDemandValuation([_rand_value(rng) for _ in range(m)])


def _xos(m: int, rng: random.Random, clauses: int = 3) -> XOSValuation:
    rows = []
    for _ in range(clauses):
        rows.append(
            [Fraction(0) if rng.random() < 0.34 else _rand_value(rng) for _ in range(m)]
        )
    return XOSValuation(m, rows)


def _coverage(m: int, rng: random.Random, elements: Optional[int] = None) -> CoverageValuation:
    u = elements if elements is not None else m + rng.randint(0, 2)
    weights = [_rand_value(rng) for _ in range(u)]
    covers = [[e for e in range(u) if rng.random() < 0.5] for _ in range(m)]
    return CoverageValuation(weights, covers)


def repair_monotone_subadditive(raw: dict[int, Fraction], m: int) -> dict[int, Fraction]:
    """Greatest monotone subadditive minorant of a raw nonnegative table.

    Two capping passes. First every bundle is capped by the cheapest superset
    (monotone repair from above). Then, in increasing cardinality order, each
    bundle is capped by the cheapest two-part split, which propagates to the
    cheapest partition into any number of parts. The result is the largest
    table below the input that is normalized, non-decreasing, and
    subadditive, and a table already satisfying all three is unchanged.
    """
    size = 1 << m
    capped = [min(raw[sup] for sup in range(size) if sup & mask == mask) for mask in range(size)]
    capped[0] = Fraction(0)
    order = sorted(range(size), key=lambda mask: mask.bit_count())
    for mask in order:
        if mask == 0 or mask.bit_count() == 1:
            continue
        low = mask & -mask
        best = capped[mask]
        # part containing the lowest item runs over submasks including it
        sub = mask
        while sub:
            if sub & low and sub != mask:
                other = mask ^ sub
                split = capped[sub] + capped[other]
                if split < best:
                    best = split
            sub = (sub - 1) & mask
        capped[mask] = best
    return {mask: capped[mask] for mask in range(size)}


def _explicit_subadditive(m: int, rng: random.Random) -> ExplicitValuation:
    if m > EXPLICIT_ITEM_CAP:
        raise CapacityError("explicit table generation", 1 << m, 1 << EXPLICIT_ITEM_CAP)
    raw = {
        mask: Fraction(rng.randint(0, 4 * max(1, mask.bit_count())), rng.choice((1, 2)))
        for mask in range(1 << m)
    }
    raw[0] = Fraction(0)
    return ExplicitValuation(m, repair_monotone_subadditive(raw, m))


_BUILDERS = {
    "additive": _additive,
    "unit-demand": _unit_demand,
    "xos": _xos,
    "coverage": _coverage,
    "explicit-subadditive": _explicit_subadditive,
}


def generate(kind: str, n: int, m: int, seed: int, **params) -> Instance:
    """Deterministic n-bidder, m-item instance of the requested kind.

    ``mixed`` draws each bidder's kind independently (explicit tables only
    when m allows them).
    """
    if kind not in GENERATOR_KINDS:
        raise ParameterError(f"unknown generator kind {kind!r}; choose from {GENERATOR_KINDS}")
    if n < 1 or m < 1:
        raise ParameterError("need n >= 1 bidders and m >= 1 items")
    valuations: list[Valuation] = []
    for i in range(n):
        rng = random.Random(derive_seed(seed, "bidder", kind, n, m, i))
        if kind == "mixed":
            pool = [k for k in _BUILDERS if k != "explicit-subadditive" or m <= EXPLICIT_ITEM_CAP]
            bidder_kind = rng.choice(sorted(pool))
            valuations.append(_BUILDERS[bidder_kind](m, rng))
        else:
            valuations.append(_BUILDERS[kind](m, rng, **params))
    return Instance(
        m,
        tuple(valuations),
        metadata={"generator": kind, "seed": seed, "n": n, "m": m},
    )


@dataclass(frozen=True)
class CorpusInstance:
    label: str
    instance: Instance
    config: MechanismConfig


def standard_corpus(seed: int = DEFAULT_CORPUS_SEED) -> list[CorpusInstance]:
    """The bundled mixed-kind corpus used by the identity and bound checks.

    Twenty-plus instances with n <= 3, m <= 5. Keep probabilities are 1/2 or
    1/3 so halting stays possible on the three-bidder instances while the
    cancellation bound q_i <= 1 - p holds structurally for every feasible
    solution at this scale.
    """
    shapes = [
        ("additive", 1, 4, Fraction(1, 2), Fraction(1, 20)),
        ("additive", 2, 3, Fraction(1, 2), Fraction(1, 20)),
        ("additive", 3, 4, Fraction(1, 2), Fraction(1, 20)),
        ("unit-demand", 2, 3, Fraction(1, 2), Fraction(1, 20)),
        ("unit-demand", 3, 2, Fraction(1, 2), Fraction(1, 20)),
        ("unit-demand", 3, 5, Fraction(1, 3), Fraction(1, 8)),
        ("xos", 2, 4, Fraction(1, 2), Fraction(1, 20)),
        ("xos", 3, 3, Fraction(1, 2), Fraction(1, 20)),
        ("xos", 3, 4, Fraction(1, 2), Fraction(1, 10)),
        ("coverage", 2, 4, Fraction(1, 2), Fraction(1, 20)),
        ("coverage", 3, 3, Fraction(1, 2), Fraction(1, 20)),
        ("coverage", 3, 5, Fraction(1, 3), Fraction(1, 20)),
        ("explicit-subadditive", 2, 2, Fraction(1, 2), Fraction(1, 20)),
        ("explicit-subadditive", 2, 3, Fraction(1, 2), Fraction(1, 20)),
        ("explicit-subadditive", 3, 3, Fraction(1, 2), Fraction(1, 20)),
        ("explicit-subadditive", 3, 2, Fraction(1, 2), Fraction(1, 4)),
        ("mixed", 2, 4, Fraction(1, 2), Fraction(1, 20)),
        ("mixed", 3, 4, Fraction(1, 2), Fraction(1, 20)),
        ("mixed", 3, 5, Fraction(1, 2), Fraction(1, 20)),
        ("mixed", 3, 3, Fraction(1, 3), Fraction(1, 20)),
        ("mixed", 2, 5, Fraction(1, 2), Fraction(1, 20)),
        ("mixed", 3, 2, Fraction(1, 2), Fraction(1, 20)),
    ]
    corpus = []
    for idx, (kind, n, m, c, p) in enumerate(shapes):
        inst = generate(kind, n, m, derive_seed(seed, "corpus", idx))
        config = MechanismConfig(c=c, p=p, q_variant=Q_HALT, seed=derive_seed(seed, "run", idx))
        corpus.append(CorpusInstance(f"{idx:02d}-{kind}-n{n}-m{m}", inst, config))
    # A pinned instance whose LP optimum shares one item among all three
    # bidders, so the halt event has positive probability (exactly 1/27 at
    # c = 1/2) and the q machinery is exercised non-trivially.
    contended = generate("xos", 3, 4, 27)
    corpus.append(
        CorpusInstance(
            f"{len(shapes):02d}-xos-n3-m4-contended",
            contended,
            MechanismConfig(c=Fraction(1, 2), p=Fraction(1, 20), q_variant=Q_HALT, seed=27),
        )
    )
    return corpus


def truthfulness_corpus(seed: int = DEFAULT_CORPUS_SEED) -> list[CorpusInstance]:
    """Explicit-table instances for the misreport certification (>= 10).

    The final entry is the contended three-bidder instance converted to
    explicit tables: its optimum puts three bidders on one item, so the
    certification also covers runs where halting and the q correction are
    live rather than identically zero.
    """
    shapes = [(2, 2), (2, 2), (2, 3), (2, 3), (2, 3), (3, 2), (3, 2), (2, 3), (3, 3), (2, 2), (3, 2), (2, 3)]
    corpus = []
    for idx, (n, m) in enumerate(shapes):
        inst = generate("explicit-subadditive", n, m, derive_seed(seed, "truthful", idx))
        config = MechanismConfig(
            c=Fraction(1, 2), p=Fraction(1, 20), q_variant=Q_HALT,
            seed=derive_seed(seed, "truthful-run", idx),
        )
        corpus.append(CorpusInstance(f"T{idx:02d}-explicit-n{n}-m{m}", inst, config))
    contended = generate("xos", 3, 4, 27)
    corpus.append(
        CorpusInstance(
            f"T{len(shapes):02d}-explicit-n3-m4-contended",
            Instance(
                4,
                tuple(ExplicitValuation.from_valuation(v) for v in contended.valuations),
                metadata={"generator": "explicit-contended", "seed": 27, "n": 3, "m": 4},
            ),
            MechanismConfig(c=Fraction(1, 2), p=Fraction(1, 20), q_variant=Q_HALT, seed=27),
        )
    )
    return corpus


def random_feasible_solution(
    n: int,
    m: int,
    seed: int,
    *,
    bundles_per_bidder: int = 3,
    max_bundle_items: int = 4,
) -> FractionalSolution:
    """A feasible fractional point with overlapping supports, not an LP optimum.

    Used to exercise the halting-probability bound and the rounding stages on
    solution shapes the simplex would not necessarily produce. Masses are
    scaled so that every item and bidder constraint holds exactly.
    """
    rng = random.Random(derive_seed(seed, "feasible", n, m))
    entries: dict = {}
    for i in range(n):
        chosen = set()
        for _ in range(bundles_per_bidder):
            size = rng.randint(1, min(max_bundle_items, m))
            bundle = ItemSet.from_indices(rng.sample(range(m), size))
            if bundle.mask in chosen:
                continue
            chosen.add(bundle.mask)
            entries[(i, bundle)] = Fraction(rng.randint(1, 6), 12)
    # scale down to feasibility
    worst = Fraction(1)
    for j in range(m):
        load = sum((x for (i, b), x in entries.items() if j in b), Fraction(0))
        worst = max(worst, load)
    for i in range(n):
        mass = sum((x for (k, _), x in entries.items() if k == i), Fraction(0))
        worst = max(worst, mass)
    if worst > 1:
        entries = {key: x / worst for key, x in entries.items()}
    return FractionalSolution(
        n=n, m=m, entries=entries, objective=Fraction(0), arithmetic=EXACT
    )


def overlap_demo() -> tuple[Instance, FractionalSolution]:
    """Three bidders, two items, with a hand-built feasible solution.

    Bidder 0 tentatively draws item 0 with mass 1/2; bidders 1 and 2 each
    draw item 1 with mass 1/2, so the run halts exactly when both of them
    collide (probability 1/4 at c = 1). Because that collision involves an
    item outside bidder 0's bundle, the "own-items" q variant undercounts
    bidder 0's halting risk and its survival marginal falls strictly below
    p * x; the "halt" variant is exact. Pair with c = 1 and any small p.
    """
    instance = Instance(
        2,
        (
            AdditiveValuation([2, 3]),
            UnitDemandValuation([1, 4]),
            AdditiveValuation([0, 5]),
        ),
        metadata={"generator": "overlap-demo", "seed": 0, "n": 3, "m": 2},
    )
    entries = {
        (0, ItemSet.from_indices([0])): Fraction(1, 2),
        (1, ItemSet.from_indices([1])): Fraction(1, 2),
        (2, ItemSet.from_indices([1])): Fraction(1, 2),
    }
    # objective under c = 1 proxies (identity): sum of x * v(S)
    objective = Fraction(1, 2) * 2 + Fraction(1, 2) * 4 + Fraction(1, 2) * 5
    solution = FractionalSolution(n=3, m=2, entries=entries, objective=objective)
    return instance, solution
