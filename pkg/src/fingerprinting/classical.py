"""Optimal classical one-sided protocols and their closed-form error rates."""

from __future__ import annotations

import itertools
import math
from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction

from .strategy import (
    ErrorProfile,
    PartyStrategy,
    ProtocolParams,
    RefereeRule,
    SharedKeyDistribution,
    StrategyTriple,
)

__all__ = [
    "GroupAssignment",
    "PermutationKey",
    "balanced_sizes",
    "lemma3_bound",
    "classical_bound",
    "semiclassical_bound",
    "exact_permuted_error",
    "grouping_strategy",
    "permuted_grouping",
    "reduced_permuted_grouping",
    "semiclassical_grouping",
    "permuted_profile",
    "ENUMERATION_CUTOFF",
]

# Above this many messages the n! key tables are generated lazily.
ENUMERATION_CUTOFF = 8


def balanced_sizes(n: int, m: int) -> list[int]:
    """Group sizes of the balanced partition: ``n mod m`` groups of ceil(n/m), rest floor(n/m)."""
    q, k = divmod(n, m)
    return [q + 1] * k + [q] * (m - k)


def lemma3_bound(n: int, m: int) -> int:
    """Minimum number of erring ordered pairs, ``k*ceil(n/m)**2 + (m-k)*floor(n/m)**2 - n``."""
    if n < 1 or m < 1:
        raise ValueError("n and m must be >= 1")
    return sum(s * s for s in balanced_sizes(n, m)) - n


def classical_bound(n: int, m: int) -> Fraction:
    """Minimum worst-case error of a one-sided classical protocol with shared randomness.

    Zero when ``n <= m`` (including ``n = 1``, where no unequal pair exists).
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be >= 1")
    if n <= m:
        return Fraction(0)
    return Fraction(lemma3_bound(n, m), n * n - n)


def semiclassical_bound(n: int, m: int) -> Fraction:
    """Error of the grouping protocol run over ``m**2`` groups (orthonormal operator basis)."""
    if n < 1 or m < 1:
        raise ValueError("n and m must be >= 1")
    return classical_bound(n, m * m)


def exact_permuted_error(n: int, m: int) -> Fraction:
    """Probability that two fixed distinct messages share a group of a random balanced partition.

    Counted directly: ordered pairs of distinct messages inside each group over
    all ordered pairs of distinct messages.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be >= 1")
    if n == 1:
        return Fraction(0)
    same = sum(s * (s - 1) for s in balanced_sizes(n, m))
    return Fraction(same, n * (n - 1))


@dataclass(frozen=True)
class GroupAssignment:
    """Deterministic fingerprinting function ``x -> assignment[x]`` into ``range(m)``."""

    assignment: tuple[int, ...]
    m: int

    def __post_init__(self):
        object.__setattr__(self, "assignment", tuple(int(a) for a in self.assignment))
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if any(not 0 <= a < self.m for a in self.assignment):
            raise ValueError(f"fingerprints must lie in range({self.m})")

    @classmethod
    def balanced(cls, n: int, m: int) -> "GroupAssignment":
        """Message ``x`` goes to group ``x mod m``."""
        return cls(tuple(x % m for x in range(n)), m)

    @classmethod
    def constant(cls, n: int, m: int, value: int = 0) -> "GroupAssignment":
        return cls((value,) * n, m)

    @property
    def n(self) -> int:
        return len(self.assignment)

    def group_sizes(self) -> list[int]:
        sizes = [0] * self.m
        for a in self.assignment:
            sizes[a] += 1
        return sizes

    def groups(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.m)]
        for x, a in enumerate(self.assignment):
            out[a].append(x)
        return out

    def relabel(self, perm: Sequence[int]) -> "GroupAssignment":
        """Assignment applied after relabeling messages: ``x -> assignment[perm[x]]``."""
        return GroupAssignment(tuple(self.assignment[perm[x]] for x in range(self.n)), self.m)

    def to_strategy(self) -> PartyStrategy:
        return PartyStrategy.from_assignment(self.assignment, self.m)


@dataclass(frozen=True)
class PermutationKey:
    """A relabeling of messages, ``perm[x]`` being the image of ``x``.

    ``index`` is the Lehmer-code rank in lexicographic order, so index 0 is
    the identity and index ``n! - 1`` the reversal.
    """

    perm: tuple[int, ...]
    index: int

    def __post_init__(self):
        if sorted(self.perm) != list(range(len(self.perm))):
            raise ValueError(f"{self.perm} is not a permutation")
        if self.index != _rank(self.perm):
            raise ValueError("index does not match the Lehmer rank of perm")

    @classmethod
    def from_index(cls, n: int, index: int) -> "PermutationKey":
        return cls(_unrank(n, index), index)

    @classmethod
    def from_perm(cls, perm: Sequence[int]) -> "PermutationKey":
        perm = tuple(perm)
        return cls(perm, _rank(perm))

    @property
    def n(self) -> int:
        return len(self.perm)

    def __call__(self, x: int) -> int:
        return self.perm[x]


def _unrank(n: int, index: int) -> tuple[int, ...]:
    if not 0 <= index < math.factorial(n):
        raise ValueError(f"index {index} out of range for n={n}")
    pool = list(range(n))
    out = []
    for i in range(n, 0, -1):
        digit, index = divmod(index, math.factorial(i - 1))
        out.append(pool.pop(digit))
    return tuple(out)


def _rank(perm: Sequence[int]) -> int:
    n = len(perm)
    pool = list(range(n))
    index = 0
    for i, v in enumerate(perm):
        digit = pool.index(v)
        pool.pop(digit)
        index += digit * math.factorial(n - 1 - i)
    return index


class _PermutedTables(Sequence):
    # Key xi -> deterministic table of the balanced grouping after relabeling by perm_xi.
    def __init__(self, n: int, m: int):
        self.n, self.m = n, m
        self._count = math.factorial(n)
        one, zero = Fraction(1), Fraction(0)
        self._rows = tuple(tuple(one if a == g else zero for a in range(m)) for g in range(m))

    def __len__(self):
        return self._count

    def __getitem__(self, xi):
        if isinstance(xi, slice):
            return [self[i] for i in range(*xi.indices(self._count))]
        if not 0 <= xi < self._count:
            raise IndexError(xi)
        perm = _unrank(self.n, xi)
        return tuple(self._rows[perm[x] % self.m] for x in range(self.n))


def grouping_strategy(n: int, m: int) -> StrategyTriple:
    """Keyless deterministic grouping ``x -> x mod m`` with referee ``delta(a, b)``."""
    party = GroupAssignment.balanced(n, m).to_strategy()
    return StrategyTriple(
        params=ProtocolParams.symmetric(n, m),
        alice=party,
        bob=party,
        referee=RefereeRule.identity(m),
        key_dist=SharedKeyDistribution.single(),
    )


def permuted_grouping(n: int, m: int) -> StrategyTriple:
    """Grouping strategy applied after a uniformly random shared relabeling of messages.

    One key per permutation (``n!`` keys, Lehmer-ranked).  Tables are
    materialized for ``n <= ENUMERATION_CUTOFF`` and generated per key above it.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be >= 1")
    lazy = _PermutedTables(n, m)
    if n <= ENUMERATION_CUTOFF:
        party = PartyStrategy(tuple(lazy), n, m, validate=False)
        keys = SharedKeyDistribution.uniform(len(lazy))
    else:
        party = PartyStrategy(lazy, n, m)
        keys = SharedKeyDistribution.uniform(len(lazy))
    return StrategyTriple(ProtocolParams.symmetric(n, m), party, party, RefereeRule.identity(m), keys)


def semiclassical_grouping(n: int, m: int) -> StrategyTriple:
    """Permuted grouping over ``m**2`` groups, one per orthonormal basis operator."""
    return permuted_grouping(n, m * m)


def _set_partitions(items: list[int], sizes: list[int]):
    # Unordered partitions of items into blocks with the given multiset of sizes;
    # the smallest remaining item always opens the next block.
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for size in sorted(set(sizes)):
        remaining = list(sizes)
        remaining.remove(size)
        for mates in itertools.combinations(rest, size - 1):
            block = [first, *mates]
            left = [x for x in rest if x not in mates]
            for tail in _set_partitions(left, remaining):
                yield [block, *tail]


def reduced_permuted_grouping(n: int, m: int) -> StrategyTriple:
    """Quotient of :func:`permuted_grouping` keeping one key per distinct balanced partition.

    Every partition of the messages into groups of the balanced sizes appears
    once with uniform weight; blocks are labeled in order of their smallest
    message.  Each partition is hit equally often by the ``n!`` relabelings,
    so the error profile equals that of the full construction.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be >= 1")
    sizes = [s for s in balanced_sizes(n, m) if s]
    one, zero = Fraction(1), Fraction(0)
    tables = []
    for blocks in _set_partitions(list(range(n)), sizes):
        label = [0] * n
        for g, block in enumerate(blocks):
            for x in block:
                label[x] = g
        tables.append(tuple(tuple(one if a == label[x] else zero for a in range(m)) for x in range(n)))
    party = PartyStrategy(tuple(tables), n, m, validate=False)
    return StrategyTriple(
        ProtocolParams.symmetric(n, m), party, party, RefereeRule.identity(m), SharedKeyDistribution.uniform(len(tables))
    )


def permuted_profile(n: int, m: int) -> ErrorProfile:
    """Closed-form error profile of :func:`permuted_grouping`, usable for any ``n``."""
    e = exact_permuted_error(n, m)
    one, zero = Fraction(1), Fraction(0)
    p1 = tuple(tuple(one if x == y else e for y in range(n)) for x in range(n))
    pe = tuple(tuple(zero if x == y else e for y in range(n)) for x in range(n))
    return ErrorProfile(p1=p1, pe=pe, wce=e, ne=e * (n * n - n))
