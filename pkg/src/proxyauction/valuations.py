"""Bidder valuations, demand oracles, and the keep-probability proxy transform.

A valuation maps bundles of items to nonnegative exact rationals. Five
structured kinds are supported (explicit table, additive, unit-demand, XOS,
coverage). Every valuation answers value queries and demand queries; queries
are tallied in a per-valuation :class:`QueryCounter`, the artifact's stand-in
for communication cost.

``ProxyValuation`` wraps a base valuation ``v`` with a keep probability ``c``
(``1/c`` integral) and evaluates the expected value of a bundle after each of
its items survives independently with probability ``c``. Additive and
unit-demand bases use closed forms; other kinds enumerate the ``2^|S|``
surviving subsets under a configurable cap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .errors import CapacityError, MalformedValuationError, ParameterError
from .itemsets import EMPTY_SET, ItemSet, submasks

# Default enumeration caps. Proxy enumeration is 2^|S|; demand scans are 2^m;
# the structural checkers scan pairs of bundles, costing up to 4^m.
PROXY_SUBSET_CAP = 20
DEMAND_SCAN_CAP = 20
PAIR_CHECK_CAP = 10

Value = Fraction


def as_value(x) -> Fraction:
    v = Fraction(x)
    if v < 0:
        raise MalformedValuationError(f"values must be nonnegative, got {v}")
    return v


@dataclass
class QueryCounter:
    """Monotone per-session tallies of oracle queries."""

    value_queries: int = 0
    demand_queries: int = 0
    proxy_value_queries: int = 0

    def merge(self, other: "QueryCounter") -> None:
        self.value_queries += other.value_queries
        self.demand_queries += other.demand_queries
        self.proxy_value_queries += other.proxy_value_queries

    def as_dict(self) -> dict:
        return {
            "value_queries": self.value_queries,
            "demand_queries": self.demand_queries,
            "proxy_value_queries": self.proxy_value_queries,
        }


class Valuation:
    """Base class: a set function over bundles of items 0..m-1.

    Subclasses implement ``_value(mask)``; the public ``value``/``demand``
    entry points validate inputs and update the query counter. Valuations are
    immutable after construction (the counter is the only mutable attachment),
    so they are safe to share across concurrent readers.
    """

    kind = "abstract"

    def __init__(self, m: int):
        if m < 1:
            raise MalformedValuationError("a valuation needs at least one item")
        self.m = m
        self.counter = QueryCounter()

    # -- queries ---------------------------------------------------------

    def value(self, bundle: ItemSet) -> Value:
        """v(bundle); counted as one value query."""
        self._check_universe(bundle)
        self.counter.value_queries += 1
        return self._value(bundle.mask)

    def demand(self, prices: Sequence, *, scan_cap: int = DEMAND_SCAN_CAP) -> ItemSet:
        """A profit-maximizing bundle at the given item prices.

        Maximizes v(S) - sum of prices over S. Ties resolve to the fewest
        items, then to the lexicographically smallest index tuple, so the
        answer is deterministic. Counted as one demand query.
        """
        prices = self._check_prices(prices)
        self.counter.demand_queries += 1
        return self._demand(prices, scan_cap)

    # -- internals -------------------------------------------------------

    def _value(self, mask: int) -> Value:
        raise NotImplementedError

    def _demand(self, prices: Sequence[Fraction], scan_cap: int) -> ItemSet:
        return self._demand_by_scan(prices, scan_cap)

    def _demand_by_scan(self, prices: Sequence[Fraction], scan_cap: int) -> ItemSet:
        if self.m > scan_cap:
            raise CapacityError("demand scan over all bundles", 1 << self.m, 1 << scan_cap)
        # price_sums[mask] built by peeling the lowest set bit.
        price_sums = [Fraction(0)] * (1 << self.m)
        for mask in range(1, 1 << self.m):
            low = mask & -mask
            price_sums[mask] = price_sums[mask ^ low] + prices[low.bit_length() - 1]
        best_mask, best_profit, best_key = 0, Fraction(0), (0, ())
        for mask in range(1, 1 << self.m):
            profit = self._value(mask) - price_sums[mask]
            if profit > best_profit:
                best_mask, best_profit, best_key = mask, profit, ItemSet(mask).selection_key()
            elif profit == best_profit:
                key = ItemSet(mask).selection_key()
                if key < best_key:
                    best_mask, best_key = mask, key
        return ItemSet(best_mask)

    def _check_universe(self, bundle: ItemSet) -> None:
        if not bundle.fits_universe(self.m):
            raise MalformedValuationError(
                f"bundle {bundle!r} is outside the {self.m}-item universe"
            )

    def _check_prices(self, prices: Sequence) -> tuple[Fraction, ...]:
        if len(prices) != self.m:
            raise ParameterError(f"expected {self.m} prices, got {len(prices)}")
        out = tuple(Fraction(p) for p in prices)
        if any(p < 0 for p in out):
            raise ParameterError("item prices must be nonnegative")
        return out

    def payload(self) -> dict:
        """Kind-specific serialization payload (rationals as strings)."""
        raise NotImplementedError

    def scaled(self, factor: Fraction) -> "Valuation":
        """Same-kind valuation with every value multiplied by ``factor`` >= 0."""
        raise NotImplementedError


class AdditiveValuation(Valuation):
    """v(S) = sum of per-item weights over S."""

    kind = "additive"

    def __init__(self, weights: Iterable):
        ws = tuple(as_value(w) for w in weights)
        super().__init__(len(ws))
        self.weights = ws

    def _value(self, mask: int) -> Value:
        total = Fraction(0)
        while mask:
            low = mask & -mask
            total += self.weights[low.bit_length() - 1]
            mask ^= low
        return total

    def _demand(self, prices, scan_cap) -> ItemSet:
        # Keep exactly the items with positive margin; dropping a zero-margin
        # item wins the cardinality tie-break.
        return ItemSet.from_indices(
            j for j in range(self.m) if self.weights[j] > prices[j]
        )

    def payload(self) -> dict:
        return {"weights": [str(w) for w in self.weights]}

    def scaled(self, factor: Fraction) -> "AdditiveValuation":
        return AdditiveValuation([w * factor for w in self.weights])


class UnitDemandValuation(Valuation):
    """v(S) = max per-item weight in S (0 for the empty bundle)."""

    kind = "unit-demand"

    def __init__(self, weights: Iterable):
        ws = tuple(as_value(w) for w in weights)
        super().__init__(len(ws))
        self.weights = ws

    def _value(self, mask: int) -> Value:
        best = Fraction(0)
        while mask:
            low = mask & -mask
            w = self.weights[low.bit_length() - 1]
            if w > best:
                best = w
            mask ^= low
        return best

    def _demand(self, prices, scan_cap) -> ItemSet:
        # A best singleton dominates every larger bundle (value is a max,
        # prices add up), and the empty bundle wins ties at zero profit.
        best_j, best_margin = None, Fraction(0)
        for j in range(self.m):
            margin = self.weights[j] - prices[j]
            if margin > best_margin:
                best_j, best_margin = j, margin
        return EMPTY_SET if best_j is None else ItemSet.singleton(best_j)

    def payload(self) -> dict:
        return {"weights": [str(w) for w in self.weights]}

    def scaled(self, factor: Fraction) -> "UnitDemandValuation":
        return UnitDemandValuation([w * factor for w in self.weights])


class XOSValuation(Valuation):
    """v(S) = max over additive clauses of the clause's weight sum on S."""

    kind = "xos"

    def __init__(self, m: int, clauses: Iterable[Iterable]):
        super().__init__(m)
        parsed = []
        for clause in clauses:
            ws = tuple(as_value(w) for w in clause)
            if len(ws) != m:
                raise MalformedValuationError(
                    f"xos clause has {len(ws)} weights for a {m}-item universe"
                )
            parsed.append(ws)
        self.clauses = tuple(parsed)

    def _value(self, mask: int) -> Value:
        best = Fraction(0)
        for clause in self.clauses:
            total = Fraction(0)
            rest = mask
            while rest:
                low = rest & -rest
                total += clause[low.bit_length() - 1]
                rest ^= low
            if total > best:
                best = total
        return best

    def payload(self) -> dict:
        return {"clauses": [[str(w) for w in clause] for clause in self.clauses]}

    def scaled(self, factor: Fraction) -> "XOSValuation":
        return XOSValuation(self.m, [[w * factor for w in cl] for cl in self.clauses])


class CoverageValuation(Valuation):
    """Items cover weighted ground elements; v(S) = weight covered by S.

    ``covers[j]`` lists the ground elements item j covers; ``element_weights``
    gives each element's weight. Coverage valuations are submodular, hence XOS
    and subadditive.
    """

    kind = "coverage"

    def __init__(self, element_weights: Iterable, covers: Sequence[Iterable[int]]):
        ws = tuple(as_value(w) for w in element_weights)
        super().__init__(len(covers))
        self.element_weights = ws
        masks = []
        for cover in covers:
            mask = 0
            for e in cover:
                if not (0 <= e < len(ws)):
                    raise MalformedValuationError(
                        f"coverage element {e} outside universe of {len(ws)} elements"
                    )
                mask |= 1 << e
            masks.append(mask)
        self.cover_masks = tuple(masks)

    def _value(self, mask: int) -> Value:
        covered = 0
        rest = mask
        while rest:
            low = rest & -rest
            covered |= self.cover_masks[low.bit_length() - 1]
            rest ^= low
        total = Fraction(0)
        while covered:
            low = covered & -covered
            total += self.element_weights[low.bit_length() - 1]
            covered ^= low
        return total

    def payload(self) -> dict:
        return {
            "element_weights": [str(w) for w in self.element_weights],
            "covers": [
                [e for e in range(len(self.element_weights)) if (mask >> e) & 1]
                for mask in self.cover_masks
            ],
        }

    def scaled(self, factor: Fraction) -> "CoverageValuation":
        covers = self.payload()["covers"]
        return CoverageValuation([w * factor for w in self.element_weights], covers)


class ExplicitValuation(Valuation):
    """Full table over every bundle of the universe.

    The table may violate normalization or monotonicity; the structural
    checkers below detect that. Missing entries are a malformed valuation.
    """

    kind = "explicit"

    def __init__(self, m: int, table: dict):
        super().__init__(m)
        full = {}
        for key, raw in table.items():
            mask = key.mask if isinstance(key, ItemSet) else int(key)
            if not 0 <= mask < (1 << m):
                raise MalformedValuationError(f"table bundle {mask} outside 2^{m} universe")
            full[mask] = as_value(raw)
        missing = (1 << m) - len(full)
        if missing:
            raise MalformedValuationError(
                f"explicit table is missing {missing} of {1 << m} bundles"
            )
        self.table = full

    @classmethod
    def from_valuation(cls, v: Valuation) -> "ExplicitValuation":
        return cls(v.m, {mask: v._value(mask) for mask in range(1 << v.m)})

    def _value(self, mask: int) -> Value:
        try:
            return self.table[mask]
        except KeyError:  # pragma: no cover - construction forbids this
            raise MalformedValuationError(f"explicit table missing bundle mask {mask}")

    def replace(self, bundle: ItemSet, value) -> "ExplicitValuation":
        table = dict(self.table)
        table[bundle.mask] = as_value(value)
        return ExplicitValuation(self.m, table)

    def payload(self) -> dict:
        values = {
            ",".join(str(j) for j in ItemSet(mask)): str(self.table[mask])
            for mask in range(1, 1 << self.m)
        }
        if self.table[0] != 0:
            values[""] = str(self.table[0])  # abnormal table; keep it exact
        return {"values": values}

    def scaled(self, factor: Fraction) -> "ExplicitValuation":
        return ExplicitValuation(self.m, {k: v * factor for k, v in self.table.items()})


class ProxyValuation(Valuation):
    """Expected value of a bundle after independent per-item survival.

    ``value(S)`` returns E[v(T)] where T keeps each item of S independently
    with probability ``c``. With c = 1 this is the base valuation itself.
    Results are cached per bundle; the cache is an evaluation shortcut and
    does not affect query counts.
    """

    kind = "proxy"

    def __init__(self, base: Valuation, c, *, subset_cap: int = PROXY_SUBSET_CAP):
        if isinstance(base, ProxyValuation):
            raise ParameterError("proxy valuations do not nest")
        c = Fraction(c)
        if not (0 < c <= 1) or c.numerator != 1:
            raise ParameterError(f"keep probability must be a reciprocal integer in (0,1], got {c}")
        super().__init__(base.m)
        self.base = base
        self.c = c
        self.subset_cap = subset_cap
        self.counter = base.counter  # shared: proxy answers come from the same bidder
        self._cache: dict[int, Value] = {}

    def value(self, bundle: ItemSet) -> Value:
        self._check_universe(bundle)
        self.counter.proxy_value_queries += 1
        return self._value(bundle.mask)

    def _value(self, mask: int) -> Value:
        got = self._cache.get(mask)
        if got is None:
            got = self._cache[mask] = self._expected_value(mask)
        return got

    def _expected_value(self, mask: int) -> Value:
        c = self.c
        base = self.base
        if isinstance(base, AdditiveValuation):
            return c * base._value(mask)
        if isinstance(base, UnitDemandValuation):
            # The max is the heaviest surviving item: weight w_t survives
            # first (in descending order) with probability c*(1-c)^(t-1).
            weights = sorted((base.weights[j] for j in ItemSet(mask)), reverse=True)
            total, miss = Fraction(0), Fraction(1)
            for w in weights:
                total += w * c * miss
                miss *= 1 - c
            return total
        size = mask.bit_count()
        if size > self.subset_cap:
            raise CapacityError("proxy subset enumeration", 1 << size, 1 << self.subset_cap)
        total = Fraction(0)
        keep, drop = c, 1 - c
        for sub in submasks(mask):
            kept = sub.bit_count()
            total += keep**kept * drop ** (size - kept) * base._value(sub)
        return total

    def _demand(self, prices, scan_cap) -> ItemSet:
        if isinstance(self.base, AdditiveValuation):
            return ItemSet.from_indices(
                j for j in range(self.m) if self.c * self.base.weights[j] > prices[j]
            )
        return self._demand_by_scan(prices, scan_cap)

    def payload(self) -> dict:  # pragma: no cover - proxies are not serialized
        raise NotImplementedError("proxy valuations are derived, not serialized")


# -- structural checks ----------------------------------------------------


def is_subadditive(
    v: Valuation, *, cap: int = PAIR_CHECK_CAP
) -> tuple[bool, Optional[tuple[ItemSet, ItemSet]]]:
    """Brute-force v(S) + v(T) >= v(S | T) over all bundle pairs.

    Returns (True, None) or (False, first violating pair) scanning pairs in
    increasing mask order. Costs 4^m value evaluations.
    """
    if v.m > cap:
        raise CapacityError("subadditivity pair scan", 1 << (2 * v.m), 1 << (2 * cap))
    table = [v._value(mask) for mask in range(1 << v.m)]
    for s in range(1, 1 << v.m):
        for t in range(1, 1 << v.m):
            if table[s] + table[t] < table[s | t]:
                return False, (ItemSet(s), ItemSet(t))
    return True, None


def is_monotone_normalized(
    v: Valuation, *, cap: int = PAIR_CHECK_CAP
) -> tuple[bool, Optional[str]]:
    """Check v(empty) = 0 and S subset of T implies v(S) <= v(T)."""
    if v.m > cap:
        raise CapacityError("monotonicity scan", 1 << (2 * v.m), 1 << (2 * cap))
    if v._value(0) != 0:
        return False, f"value of the empty bundle is {v._value(0)}, not 0"
    table = [v._value(mask) for mask in range(1 << v.m)]
    for t in range(1, 1 << v.m):
        for s in submasks(t):
            if table[s] > table[t]:
                return False, f"value drops from {ItemSet(s)!r} ({table[s]}) to {ItemSet(t)!r} ({table[t]})"
    return True, None


@dataclass(frozen=True)
class Instance:
    """An auction universe: m items and one valuation per bidder."""

    m: int
    valuations: tuple[Valuation, ...]
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.m < 1:
            raise ParameterError("an instance needs at least one item")
        if not self.valuations:
            raise ParameterError("an instance needs at least one bidder")
        for i, v in enumerate(self.valuations):
            if v.m != self.m:
                raise ParameterError(
                    f"bidder {i} valuation is over {v.m} items, instance has {self.m}"
                )

    @property
    def n(self) -> int:
        return len(self.valuations)

    def query_totals(self) -> dict:
        total = QueryCounter()
        for v in self.valuations:
            total.merge(v.counter)
        return total.as_dict()

    def proxies(self, c, *, subset_cap: int = PROXY_SUBSET_CAP) -> tuple[ProxyValuation, ...]:
        return tuple(ProxyValuation(v, c, subset_cap=subset_cap) for v in self.valuations)
