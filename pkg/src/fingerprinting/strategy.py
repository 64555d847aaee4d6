"""Classical fingerprinting strategies and their exact evaluation.

A strategy is a triple ``(p, q, r)`` together with a shared key distribution
``sigma``.  Alice's table for key ``xi`` gives ``p(a | x, xi)``, Bob's gives
``q(b | y, xi)`` and the referee accepts fingerprint pair ``(a, b)`` with
probability ``r(a, b)``.  Every probability is a :class:`fractions.Fraction`.

Messages, fingerprints and key indices are 0-based throughout.
"""

from __future__ import annotations

import json
from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

__all__ = [
    "ProtocolParams",
    "SharedKeyDistribution",
    "PartyStrategy",
    "RefereeRule",
    "StrategyTriple",
    "ErrorProfile",
    "acceptance_probability",
    "acceptance_matrix",
    "error_profile",
    "profile_from_acceptance",
    "is_one_sided",
    "derive_referee",
    "to_json",
    "from_json",
    "SCHEMA",
]

SCHEMA = "fingerprinting.strategy/1"

Table = tuple[tuple[Fraction, ...], ...]


def _fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        raise TypeError("probabilities must be exact; got float %r" % value)
    return Fraction(value)


def _as_table(rows) -> Table:
    return tuple(tuple(_fraction(v) for v in row) for row in rows)


@dataclass(frozen=True)
class ProtocolParams:
    n: int
    m_alice: int
    m_bob: int

    def __post_init__(self):
        for name in ("n", "m_alice", "m_bob"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"{name} must be an integer >= 1, got {value!r}")

    @classmethod
    def symmetric(cls, n: int, m: int) -> "ProtocolParams":
        return cls(n, m, m)

    @property
    def m(self) -> int:
        """Effective alphabet size, ``min(m_alice, m_bob)``."""
        return min(self.m_alice, self.m_bob)


class _UniformWeights(Sequence):
    # Lazy stand-in for ``count`` copies of 1/count.
    def __init__(self, count: int):
        self._count = count
        self._w = Fraction(1, count)

    def __len__(self):
        return self._count

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self._w] * len(range(*i.indices(self._count)))
        if i < 0:
            i += self._count
        if not 0 <= i < self._count:
            raise IndexError(i)
        return self._w


class SharedKeyDistribution:
    """Distribution ``sigma`` over a finite set of shared keys."""

    def __init__(self, weights: Sequence):
        if isinstance(weights, _UniformWeights):
            self.weights = weights
            return
        weights = tuple(_fraction(w) for w in weights)
        if not weights:
            raise ValueError("key distribution needs at least one key")
        if any(w < 0 for w in weights):
            raise ValueError("key weights must be nonnegative")
        if sum(weights) != 1:
            raise ValueError("key weights must sum to exactly 1, got %s" % sum(weights))
        self.weights = weights

    @classmethod
    def uniform(cls, count: int) -> "SharedKeyDistribution":
        if count < 1:
            raise ValueError("count must be >= 1")
        return cls(_UniformWeights(count))

    @classmethod
    def single(cls) -> "SharedKeyDistribution":
        return cls((Fraction(1),))

    @property
    def is_uniform(self) -> bool:
        return isinstance(self.weights, _UniformWeights) or len(set(self.weights)) == 1

    def __len__(self):
        return len(self.weights)

    def support(self) -> Iterator[tuple[int, Fraction]]:
        for i, w in enumerate(self.weights):
            if w:
                yield i, w

    def __eq__(self, other):
        if not isinstance(other, SharedKeyDistribution):
            return NotImplemented
        return len(self) == len(other) and all(a == b for a, b in zip(self.weights, other.weights))

    def __repr__(self):
        return f"SharedKeyDistribution(K={len(self)})"


def _check_table(table: Table, n: int, m: int, who: str) -> None:
    if len(table) != n:
        raise ValueError(f"{who}: table has {len(table)} rows, expected n={n}")
    for x, row in enumerate(table):
        if len(row) != m:
            raise ValueError(f"{who}: row {x} has {len(row)} entries, expected m={m}")
        if any(v < 0 or v > 1 for v in row):
            raise ValueError(f"{who}: row {x} has entries outside [0, 1]")
        if sum(row) != 1:
            raise ValueError(f"{who}: row {x} sums to {sum(row)}, not 1")


class PartyStrategy:
    """Per-key row-stochastic fingerprinting tables of one party.

    ``tables[xi][x][a]`` is the probability of sending ``a`` on message ``x``
    under key ``xi``.  ``tables`` may be a lazy sequence (see
    :mod:`fingerprinting.classical`); such sequences are trusted to produce
    valid tables and are not checked up front.
    """

    def __init__(self, tables: Sequence, n: int, m: int, *, validate: bool = True):
        self.n = n
        self.m = m
        if isinstance(tables, (list, tuple)):
            tables = tuple(_as_table(t) for t in tables)
            if validate:
                for t in tables:
                    _check_table(t, n, m, "party strategy")
        self.tables = tables

    @classmethod
    def from_assignment(cls, assignment: Sequence[int], m: int) -> "PartyStrategy":
        """Keyless deterministic strategy sending ``assignment[x]`` on ``x``."""
        one, zero = Fraction(1), Fraction(0)
        table = tuple(tuple(one if a == f else zero for a in range(m)) for f in assignment)
        return cls((table,), len(assignment), m)

    def __len__(self):
        return len(self.tables)

    @property
    def is_deterministic(self) -> bool:
        return all(v in (0, 1) for t in self.tables for row in t for v in row)

    def __eq__(self, other):
        if not isinstance(other, PartyStrategy):
            return NotImplemented
        return (self.n, self.m, len(self)) == (other.n, other.m, len(other)) and all(
            a == b for a, b in zip(self.tables, other.tables)
        )


@dataclass(frozen=True)
class RefereeRule:
    """Acceptance probabilities ``accept[a][b]`` of the referee."""

    accept: Table

    def __post_init__(self):
        table = _as_table(self.accept)
        object.__setattr__(self, "accept", table)
        if not table or any(len(row) != len(table[0]) for row in table):
            raise ValueError("referee rule must be a non-empty rectangular matrix")
        if any(v < 0 or v > 1 for row in table for v in row):
            raise ValueError("referee entries must lie in [0, 1]")

    @classmethod
    def identity(cls, m: int) -> "RefereeRule":
        return cls(tuple(tuple(Fraction(int(a == b)) for b in range(m)) for a in range(m)))

    @classmethod
    def constant(cls, m_alice: int, m_bob: int, value=0) -> "RefereeRule":
        v = _fraction(value)
        return cls(tuple((v,) * m_bob for _ in range(m_alice)))

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.accept), len(self.accept[0])

    @property
    def is_deterministic(self) -> bool:
        return all(v in (0, 1) for row in self.accept for v in row)


@dataclass(frozen=True)
class StrategyTriple:
    params: ProtocolParams
    alice: PartyStrategy
    bob: PartyStrategy
    referee: RefereeRule
    key_dist: SharedKeyDistribution

    def __post_init__(self):
        p = self.params
        if (self.alice.n, self.alice.m) != (p.n, p.m_alice):
            raise ValueError("alice tables do not match params")
        if (self.bob.n, self.bob.m) != (p.n, p.m_bob):
            raise ValueError("bob tables do not match params")
        if self.referee.shape != (p.m_alice, p.m_bob):
            raise ValueError("referee shape does not match params")
        if not len(self.alice) == len(self.bob) == len(self.key_dist):
            raise ValueError("alice, bob and key distribution must share one key set")

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def is_deterministic(self) -> bool:
        return (
            len(self.key_dist) == 1
            and self.alice.is_deterministic
            and self.bob.is_deterministic
            and self.referee.is_deterministic
        )

    def with_referee(self, referee: RefereeRule) -> "StrategyTriple":
        return StrategyTriple(self.params, self.alice, self.bob, referee, self.key_dist)


@dataclass(frozen=True)
class ErrorProfile:
    p1: Table
    pe: Table
    wce: Fraction
    ne: Fraction

    @property
    def n(self) -> int:
        return len(self.p1)

    def unequal_errors(self) -> list[Fraction]:
        return [self.pe[x][y] for x in range(self.n) for y in range(self.n) if x != y]

    def worst_pair(self) -> tuple[int, int]:
        """Lexicographically smallest pair attaining the worst-case error."""
        for x in range(self.n):
            for y in range(self.n):
                if self.pe[x][y] == self.wce:
                    return x, y
        raise AssertionError("unreachable")


def _sparse(row) -> list[tuple[int, Fraction]]:
    return [(i, v) for i, v in enumerate(row) if v]


def _key_acceptance(p_table: Table, q_table: Table, accept: Table, m_bob: int):
    # P1_xi(x, y) = sum_b (p r)(x, b) q(b | y)
    pr = []
    for row in p_table:
        acc = [Fraction(0)] * m_bob
        for a, pa in _sparse(row):
            for b, rab in _sparse(accept[a]):
                acc[b] += pa * rab
        pr.append(_sparse(acc))
    q_sparse = [_sparse(row) for row in q_table]
    out = []
    for prx in pr:
        prx_d = dict(prx)
        out.append([sum((prx_d[b] * qb for b, qb in qy if b in prx_d), Fraction(0)) for qy in q_sparse])
    return out


def acceptance_matrix(triple: StrategyTriple, *, max_keys: int | None = 10**6) -> Table:
    """Exact ``P1(x, y)`` for every message pair, summed over all keys."""
    n = triple.n
    if max_keys is not None and len(triple.key_dist) > max_keys:
        raise ValueError(
            f"{len(triple.key_dist)} keys exceed the enumeration limit {max_keys}; "
            "use a closed-form evaluator"
        )
    total = [[Fraction(0)] * n for _ in range(n)]
    accept = triple.referee.accept
    for xi, w in triple.key_dist.support():
        block = _key_acceptance(triple.alice.tables[xi], triple.bob.tables[xi], accept, triple.params.m_bob)
        for x in range(n):
            tx, bx = total[x], block[x]
            for y in range(n):
                if bx[y]:
                    tx[y] += w * bx[y]
    return tuple(tuple(row) for row in total)


def acceptance_probability(triple: StrategyTriple, x: int, y: int) -> Fraction:
    """Probability that the referee outputs 1 when Alice holds ``x`` and Bob ``y``."""
    n = triple.n
    if not (0 <= x < n and 0 <= y < n):
        raise IndexError(f"message pair ({x}, {y}) out of range for n={n}")
    accept = triple.referee.accept
    total = Fraction(0)
    for xi, w in triple.key_dist.support():
        p_row = triple.alice.tables[xi][x]
        q_row = triple.bob.tables[xi][y]
        for a, pa in _sparse(p_row):
            for b, qb in _sparse(q_row):
                if accept[a][b]:
                    total += w * pa * qb * accept[a][b]
    return total


def profile_from_acceptance(p1: Table) -> ErrorProfile:
    n = len(p1)
    pe = tuple(tuple((1 - p1[x][y]) if x == y else p1[x][y] for y in range(n)) for x in range(n))
    flat = [v for row in pe for v in row]
    return ErrorProfile(p1=tuple(tuple(r) for r in p1), pe=pe, wce=max(flat), ne=sum(flat, Fraction(0)))


def error_profile(triple: StrategyTriple, *, max_keys: int | None = 10**6) -> ErrorProfile:
    return profile_from_acceptance(acceptance_matrix(triple, max_keys=max_keys))


def is_one_sided(triple: StrategyTriple) -> bool:
    return all(acceptance_probability(triple, x, x) == 1 for x in range(triple.n))


def derive_referee(alice: PartyStrategy, bob: PartyStrategy, key_dist: SharedKeyDistribution) -> RefereeRule:
    """The deterministic referee accepting exactly the pairs reachable on equal messages.

    ``r(a, b) = 1`` iff some message ``x`` and some key of positive weight give
    both parties positive probability of sending ``a`` and ``b``.  Among
    one-sided referees for fixed ``(p, q)`` it has the smallest error on every
    message pair.
    """
    if alice.n != bob.n or len(alice) != len(bob) or len(alice) != len(key_dist):
        raise ValueError("alice, bob and key distribution are not compatible")
    reach = [[False] * bob.m for _ in range(alice.m)]
    for xi, _ in key_dist.support():
        pt, qt = alice.tables[xi], bob.tables[xi]
        for x in range(alice.n):
            for a, _pa in _sparse(pt[x]):
                for b, _qb in _sparse(qt[x]):
                    reach[a][b] = True
    return RefereeRule(tuple(tuple(Fraction(int(v)) for v in row) for row in reach))


# -- JSON ---------------------------------------------------------------------


def _fmt(v: Fraction) -> str:
    return f"{v.numerator}/{v.denominator}"


def _parse(s) -> Fraction:
    if not isinstance(s, str):
        raise ValueError(f"rationals are serialized as 'num/den' strings, got {s!r}")
    return Fraction(s)


def to_json(triple: StrategyTriple, *, max_keys: int = 40320) -> dict:
    """Serialize to the ``fingerprinting.strategy/1`` JSON document.

    Schema::

        {"schema": "fingerprinting.strategy/1",
         "n": int, "m_alice": int, "m_bob": int,
         "key_weights": ["num/den", ...],          # length K
         "alice":   [[["num/den", ...] x m_alice] x n] x K,
         "bob":     [[["num/den", ...] x m_bob]   x n] x K,
         "referee": [["num/den", ...] x m_bob] x m_alice}

    Indices are 0-based in array order.
    """
    if len(triple.key_dist) > max_keys:
        raise ValueError(f"refusing to serialize {len(triple.key_dist)} keys (max {max_keys})")
    p = triple.params

    def tables(party):
        return [[[_fmt(v) for v in row] for row in t] for t in party.tables]

    return {
        "schema": SCHEMA,
        "n": p.n,
        "m_alice": p.m_alice,
        "m_bob": p.m_bob,
        "key_weights": [_fmt(w) for w in triple.key_dist.weights],
        "alice": tables(triple.alice),
        "bob": tables(triple.bob),
        "referee": [[_fmt(v) for v in row] for row in triple.referee.accept],
    }


def from_json(doc) -> StrategyTriple:
    if isinstance(doc, (str, bytes)):
        doc = json.loads(doc)
    if doc.get("schema") != SCHEMA:
        raise ValueError(f"unknown schema {doc.get('schema')!r}")
    params = ProtocolParams(doc["n"], doc["m_alice"], doc["m_bob"])

    def tables(raw):
        return [[[_parse(v) for v in row] for row in t] for t in raw]

    return StrategyTriple(
        params=params,
        alice=PartyStrategy(tables(doc["alice"]), params.n, params.m_alice),
        bob=PartyStrategy(tables(doc["bob"]), params.n, params.m_bob),
        referee=RefereeRule(tuple(tuple(_parse(v) for v in row) for row in doc["referee"])),
        key_dist=SharedKeyDistribution([_parse(w) for w in doc["key_weights"]]),
    )
