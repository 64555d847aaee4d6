"""Brute-force oracle for the minimum error mass of deterministic strategies.

For a pair of fingerprinting functions the optimal one-sided referee accepts
exactly the fingerprint pairs that some equal message pair produces.  The
number of erring ordered message pairs then only depends on the overlap
matrix ``s[a][b] = |{x : fp(x) = a, fq(x) = b}|``.
"""

from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import dataclass, field

import numba
import numpy as np

from .classical import GroupAssignment, balanced_sizes, lemma3_bound

__all__ = [
    "OverlapMatrix",
    "OracleReport",
    "BudgetExceeded",
    "DEFAULT_BUDGET",
    "ne_of_deterministic",
    "exhaustive_min_ne",
    "exhaustive_min_ne_reference",
    "min_f_over_diagonal",
    "min_f_over_diagonal_exhaustive",
    "verify_diagonal_dominance",
]

log = logging.getLogger(__name__)

# numba probes for TBB when compiling parallel kernels; the fallback layer is fine.
warnings.filterwarnings("ignore", message="The TBB threading layer requires TBB version")

DEFAULT_BUDGET = 10**9


class BudgetExceeded(RuntimeError):
    """Raised instead of running a scan larger than the configured budget."""

    def __init__(self, estimate: int, budget: int):
        super().__init__(f"scan needs {estimate:,} pair evaluations, budget is {budget:,}")
        self.estimate = estimate
        self.budget = budget


def _sgn(v: int) -> int:
    return (v > 0) - (v < 0)


@dataclass(frozen=True)
class OverlapMatrix:
    counts: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        counts = tuple(tuple(int(v) for v in row) for row in self.counts)
        object.__setattr__(self, "counts", counts)
        if not counts or any(len(r) != len(counts[0]) for r in counts):
            raise ValueError("overlap matrix must be rectangular and non-empty")
        if any(v < 0 for r in counts for v in r):
            raise ValueError("overlap counts must be nonnegative")

    @classmethod
    def from_assignments(cls, fp: GroupAssignment, fq: GroupAssignment) -> "OverlapMatrix":
        if fp.n != fq.n:
            raise ValueError(f"assignments cover different message counts ({fp.n} vs {fq.n})")
        s = [[0] * fq.m for _ in range(fp.m)]
        for a, b in zip(fp.assignment, fq.assignment):
            s[a][b] += 1
        return cls(tuple(map(tuple, s)))

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.counts), len(self.counts[0])

    @property
    def n(self) -> int:
        return sum(map(sum, self.counts))

    def row_sums(self) -> list[int]:
        return [sum(r) for r in self.counts]

    def col_sums(self) -> list[int]:
        return [sum(c) for c in zip(*self.counts)]

    def unequal(self, a: int, b: int) -> int:
        """Unequal message pairs landing on fingerprint pair ``(a, b)``."""
        return self.row_sums()[a] * self.col_sums()[b] - self.counts[a][b]

    def f_value(self) -> int:
        """``F(s) = sum_{a,b,i,j} s[a][i] s[j][b] sgn(s[a][b])`` by the literal quadruple sum."""
        s = self.counts
        ma, mb = self.shape
        total = 0
        for a in range(ma):
            for b in range(mb):
                sg = _sgn(s[a][b])
                if not sg:
                    continue
                for i in range(mb):
                    for j in range(ma):
                        total += s[a][i] * s[j][b] * sg
        return total

    def f_value_fast(self) -> int:
        rows, cols = self.row_sums(), self.col_sums()
        return sum(rows[a] * cols[b] for a, r in enumerate(self.counts) for b, v in enumerate(r) if v)

    def diagonalized(self) -> "OverlapMatrix":
        """Square diagonal matrix carrying each row sum on the diagonal."""
        ma, mb = self.shape
        k = max(ma, mb)
        rows = self.row_sums()
        return OverlapMatrix(
            tuple(tuple(rows[a] if a == b and a < ma else 0 for b in range(k)) for a in range(k))
        )


def ne_of_deterministic(fp: GroupAssignment, fq: GroupAssignment) -> int:
    """Erring ordered message pairs of ``(fp, fq)`` under the optimal one-sided referee."""
    s = OverlapMatrix.from_assignments(fp, fq)
    ma, mb = s.shape
    ne = sum(s.unequal(a, b) * _sgn(s.counts[a][b]) for a in range(ma) for b in range(mb))
    if ne != s.f_value_fast() - fp.n:
        raise AssertionError("error count disagrees with F(s) - n")
    return ne


@dataclass
class OracleReport:
    n: int
    m_alice: int
    m_bob: int
    min_ne: int
    witnesses: list[tuple[GroupAssignment, GroupAssignment]]
    witness_count: int
    strategies_scanned: int
    bound_value: int
    pruned: bool = False
    matches_bound: bool = field(init=False)

    def __post_init__(self):
        if self.min_ne < self.bound_value:
            raise AssertionError(f"scan found N_e={self.min_ne} below the bound {self.bound_value}")
        self.matches_bound = self.min_ne == self.bound_value

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "m_alice": self.m_alice,
            "m_bob": self.m_bob,
            "min_ne": self.min_ne,
            "bound_value": self.bound_value,
            "matches_bound": self.matches_bound,
            "strategies_scanned": self.strategies_scanned,
            "witness_count": self.witness_count,
            "pruned": self.pruned,
            "witnesses": [
                {"alice": list(fp.assignment), "bob": list(fq.assignment)} for fp, fq in self.witnesses
            ],
        }


def _all_assignments(n: int, m: int) -> np.ndarray:
    # Odometer order: the last message's fingerprint turns fastest.
    codes = np.arange(m**n, dtype=np.int64)
    powers = m ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((codes[:, None] // powers[None, :]) % m).astype(np.int64)


def _sizes(labels: np.ndarray, m: int) -> np.ndarray:
    return np.stack([(labels == a).sum(axis=1) for a in range(m)], axis=1).astype(np.int64)


def _canonical_mask(labels: np.ndarray) -> np.ndarray:
    # Restricted-growth labelings: each new fingerprint is the next unused one.
    nxt = np.zeros(len(labels), dtype=np.int64)
    ok = np.ones(len(labels), dtype=bool)
    for x in range(labels.shape[1]):
        col = labels[:, x]
        ok &= col <= nxt
        nxt = np.maximum(nxt, col + 1)
    return ok


@numba.njit(cache=True)
def _ne_row(fp, sp, fq_labels, fq_sizes, ma, mb, out):
    n = fp.shape[0]
    present = np.zeros((ma, mb), dtype=np.bool_)
    for j in range(fq_labels.shape[0]):
        present[:, :] = False
        for x in range(n):
            present[fp[x], fq_labels[j, x]] = True
        total = 0
        for a in range(ma):
            for b in range(mb):
                if present[a, b]:
                    total += sp[a] * fq_sizes[j, b]
        out[j] = total - n


@numba.njit(parallel=True, cache=True)
def _scan(fp_labels, fp_sizes, active, fq_labels, fq_sizes, ma, mb):
    P = fp_labels.shape[0]
    best = np.full(P, np.iinfo(np.int64).max, dtype=np.int64)
    hits = np.zeros(P, dtype=np.int64)
    for i in numba.prange(P):
        if not active[i]:
            continue
        row = np.empty(fq_labels.shape[0], dtype=np.int64)
        _ne_row(fp_labels[i], fp_sizes[i], fq_labels, fq_sizes, ma, mb, row)
        lo = row.min()
        best[i] = lo
        hits[i] = (row == lo).sum()
    return best, hits


def exhaustive_min_ne(
    n: int,
    m_alice: int,
    m_bob: int | None = None,
    *,
    budget: int = DEFAULT_BUDGET,
    max_witnesses: int = 16,
    prune: bool = False,
) -> OracleReport:
    """Minimum error mass over every pair of deterministic fingerprinting functions.

    Scans ``m_alice**n * m_bob**n`` pairs (Alice's functions in odometer
    order) and compares with the balanced-partition bound at
    ``m = min(m_alice, m_bob)``.  With ``prune`` only Alice functions in
    canonical relabeling form are scanned, which leaves the minimum unchanged.

    Raises :class:`BudgetExceeded` rather than scanning a partial space.
    """
    if m_bob is None:
        m_bob = m_alice
    if min(n, m_alice, m_bob) < 1:
        raise ValueError("n, m_alice and m_bob must be >= 1")
    estimate = m_alice**n * m_bob**n
    if estimate > budget:
        raise BudgetExceeded(estimate, budget)

    fp_labels = _all_assignments(n, m_alice)
    fq_labels = _all_assignments(n, m_bob)
    active = _canonical_mask(fp_labels) if prune else np.ones(len(fp_labels), dtype=bool)
    fp_sizes, fq_sizes = _sizes(fp_labels, m_alice), _sizes(fq_labels, m_bob)
    log.debug("scanning %d x %d assignment pairs", int(active.sum()), len(fq_labels))

    best, hits = _scan(fp_labels, fp_sizes, active, fq_labels, fq_sizes, m_alice, m_bob)
    min_ne = int(best[active].min())

    witnesses = []
    row = np.empty(len(fq_labels), dtype=np.int64)
    for i in np.flatnonzero(active & (best == min_ne)):
        if len(witnesses) >= max_witnesses:
            break
        _ne_row(fp_labels[i], fp_sizes[i], fq_labels, fq_sizes, m_alice, m_bob, row)
        for j in np.flatnonzero(row == min_ne)[: max_witnesses - len(witnesses)]:
            witnesses.append(
                (GroupAssignment(tuple(fp_labels[i]), m_alice), GroupAssignment(tuple(fq_labels[j]), m_bob))
            )

    return OracleReport(
        n=n,
        m_alice=m_alice,
        m_bob=m_bob,
        min_ne=min_ne,
        witnesses=witnesses,
        witness_count=int(hits[active & (best == min_ne)].sum()),
        strategies_scanned=int(active.sum()) * len(fq_labels),
        bound_value=lemma3_bound(n, min(m_alice, m_bob)),
        pruned=prune,
    )


def exhaustive_min_ne_reference(n: int, m_alice: int, m_bob: int | None = None) -> int:
    """Pure-Python scan through :func:`ne_of_deterministic`; for small cross-checks only."""
    if m_bob is None:
        m_bob = m_alice
    best = None
    for fp in itertools.product(range(m_alice), repeat=n):
        ga = GroupAssignment(fp, m_alice)
        for fq in itertools.product(range(m_bob), repeat=n):
            ne = ne_of_deterministic(ga, GroupAssignment(fq, m_bob))
            if best is None or ne < best:
                best = ne
    return best


def min_f_over_diagonal(n: int, m: int) -> int:
    """Minimum of ``sum_a s[a][a]**2`` over nonnegative integer diagonals summing to ``n``."""
    if n < 1 or m < 1:
        raise ValueError("n and m must be >= 1")
    return sum(s * s for s in balanced_sizes(n, m))


def _compositions(n: int, parts: int):
    if parts == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, parts - 1):
            yield (first, *rest)


def min_f_over_diagonal_exhaustive(n: int, m: int) -> int:
    return min(sum(v * v for v in c) for c in _compositions(n, m))


def verify_diagonal_dominance(s: OverlapMatrix) -> bool:
    """Whether collapsing ``s`` onto its diagonal by row sums does not increase ``F``."""
    return s.diagonalized().f_value() <= s.f_value()
