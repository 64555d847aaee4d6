"""Seeded Monte Carlo rounds of classical and entanglement-assisted protocols.

Randomness comes from the Philox4x64-10 counter-based generator (numpy's
``Philox``) keyed by the seed.  Round ``r`` owns counter blocks ``2r`` and
``2r + 1`` (eight 64-bit words), converted to doubles as ``(w >> 11) * 2**-53``:

    u[0]  shared key / permutation rank
    u[1]  adversary's message pair
    u[2]  Alice's fingerprint
    u[3]  Bob's fingerprint
    u[4]  referee output

so any round can be regenerated alone and chunking never changes results.
Test vector: with key 0 and the counter wrapped to 0 the first block is
``16554d9eca36314c db20fe9d672d0fdc d7e772cee186176b 7e68b68aec7ba23b``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Sequence

import numpy as np

from .quantum import UNITARY_TOL, theorem6_error, utof_frame, simulate_theorem6_round
from .classical import PermutationKey
from .strategy import ErrorProfile, StrategyTriple, error_profile

__all__ = [
    "AdversaryMode",
    "AdversaryModel",
    "RoundOutcome",
    "SimulationReport",
    "round_uniforms",
    "hoeffding_radius",
    "run_classical",
    "run_quantum",
    "quantum_error_profile",
    "trace_to_csv",
    "DELTA",
    "WORDS_PER_ROUND",
]

DELTA = 1e-6
WORDS_PER_ROUND = 8
_CHUNK = 1 << 17
_MATERIALIZE_MAX_KEYS = 50_000


def round_uniforms(seed: int, start: int, count: int) -> np.ndarray:
    """Uniform doubles for rounds ``start .. start+count-1``, shape ``(count, 8)``."""
    bg = np.random.Philox(key=seed)
    if start:
        bg.advance(2 * start)
    raw = bg.random_raw(WORDS_PER_ROUND * count).reshape(count, WORDS_PER_ROUND)
    return (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53


def hoeffding_radius(rounds: int, delta: float = DELTA) -> float:
    return math.sqrt(math.log(2 / delta) / (2 * rounds))


class AdversaryMode(str, Enum):
    WORST_PAIR = "worst-pair"
    UNIFORM_UNEQUAL = "uniform-unequal"
    UNIFORM_ALL = "uniform-all"
    EQUAL_ONLY = "equal-only"
    SCRIPTED = "scripted"


@dataclass(frozen=True)
class AdversaryModel:
    """How the message supplier picks ``(x, y)`` each round.

    ``scripted`` cycles through ``script``; ``worst-pair`` plays the
    lexicographically first argmax of the exact error matrix.
    """

    mode: AdversaryMode
    script: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "mode", AdversaryMode(self.mode))
        object.__setattr__(self, "script", tuple((int(x), int(y)) for x, y in self.script))
        if self.mode is AdversaryMode.SCRIPTED and not self.script:
            raise ValueError("scripted adversary needs a non-empty script")

    @classmethod
    def parse(cls, text: str) -> "AdversaryModel":
        """``worst-pair`` etc., or ``scripted:0-2,1-1`` for a pair script."""
        if text.startswith("scripted:"):
            pairs = []
            for item in text.split(":", 1)[1].split(","):
                x, y = item.split("-")
                pairs.append((int(x), int(y)))
            return cls(AdversaryMode.SCRIPTED, tuple(pairs))
        return cls(AdversaryMode(text))

    def _pairs(self, n: int) -> list[tuple[int, int]]:
        if self.mode is AdversaryMode.UNIFORM_UNEQUAL:
            return [(x, y) for x in range(n) for y in range(n) if x != y]
        if self.mode is AdversaryMode.UNIFORM_ALL:
            return [(x, y) for x in range(n) for y in range(n)]
        if self.mode is AdversaryMode.EQUAL_ONLY:
            return [(x, x) for x in range(n)]
        raise AssertionError(self.mode)

    def exact_target(self, pe: Sequence[Sequence]) -> Fraction:
        n = len(pe)
        if self.mode is AdversaryMode.WORST_PAIR:
            x, y = _worst_pair(pe)
            return Fraction(pe[x][y])
        if self.mode is AdversaryMode.SCRIPTED:
            return sum((Fraction(pe[x][y]) for x, y in self.script), Fraction(0)) / len(self.script)
        pairs = self._pairs(n)
        if not pairs:
            return Fraction(0)
        return sum((Fraction(pe[x][y]) for x, y in pairs), Fraction(0)) / len(pairs)

    def choose(self, n: int, u: np.ndarray, start: int, pe) -> tuple[np.ndarray, np.ndarray]:
        count = len(u)
        if self.mode is AdversaryMode.WORST_PAIR:
            x, y = _worst_pair(pe)
            return np.full(count, x), np.full(count, y)
        if self.mode is AdversaryMode.SCRIPTED:
            script = np.array(self.script, dtype=np.int64)
            if script.min() < 0 or script.max() >= n:
                raise ValueError(f"scripted pair out of range for n={n}")
            idx = (start + np.arange(count)) % len(script)
            return script[idx, 0], script[idx, 1]
        pairs = np.array(self._pairs(n), dtype=np.int64)
        if len(pairs) == 0:
            raise ValueError("no unequal pairs exist for n = 1")
        idx = np.minimum((u * len(pairs)).astype(np.int64), len(pairs) - 1)
        return pairs[idx, 0], pairs[idx, 1]


def _worst_pair(pe) -> tuple[int, int]:
    n = len(pe)
    best = max(pe[x][y] for x in range(n) for y in range(n))
    for x in range(n):
        for y in range(n):
            if pe[x][y] == best:
                return x, y
    raise AssertionError("unreachable")


@dataclass(frozen=True)
class RoundOutcome:
    round: int
    key: int
    x: int
    y: int
    a: int  # Alice's fingerprint; -1 in quantum rounds
    b: int  # Bob's fingerprint; -1 in quantum rounds
    z: int
    correct: bool


@dataclass
class SimulationReport:
    rounds: int
    errors: int
    exact_target: Fraction
    seed: int
    false_negatives: int
    delta: float = DELTA
    trace: list[RoundOutcome] = field(default_factory=list, repr=False)

    @property
    def empirical_error(self) -> Fraction:
        return Fraction(self.errors, self.rounds)

    @property
    def deviation(self) -> float:
        return abs(self.errors / self.rounds - float(self.exact_target))

    @property
    def radius(self) -> float:
        return hoeffding_radius(self.rounds, self.delta)

    @property
    def within_bound(self) -> bool:
        return self.deviation <= self.radius

    def to_json(self) -> dict:
        e = self.empirical_error
        return {
            "rounds": self.rounds,
            "errors": self.errors,
            "empirical_error": f"{e.numerator}/{e.denominator}",
            "empirical_error_float": float(e),
            "exact_target": f"{self.exact_target.numerator}/{self.exact_target.denominator}",
            "exact_target_float": float(self.exact_target),
            "deviation": self.deviation,
            "hoeffding_radius": self.radius,
            "delta": self.delta,
            "within_bound": self.within_bound,
            "false_negatives": self.false_negatives,
            "seed": self.seed,
        }


def _pick(cum: np.ndarray, u: np.ndarray) -> np.ndarray:
    # First index whose cumulative probability exceeds u.
    idx = (cum <= u[:, None]).sum(axis=1)
    return np.minimum(idx, cum.shape[1] - 1)


def _cumulative(table) -> np.ndarray:
    return np.cumsum(np.array([[float(v) for v in row] for row in table]), axis=1)


def _check_run(rounds: int) -> None:
    if not isinstance(rounds, int) or rounds < 1:
        raise ValueError(f"rounds must be a positive integer, got {rounds!r}")


def run_classical(
    triple: StrategyTriple,
    adversary: AdversaryModel,
    rounds: int,
    seed: int,
    *,
    profile: ErrorProfile | None = None,
    trace_cap: int = 0,
) -> SimulationReport:
    """Simulate ``rounds`` independent protocol rounds.

    Each round draws a key from ``sigma``, Alice's and Bob's fingerprints
    from their tables and the referee bit from ``r(a, b)``.  ``profile``
    supplies the exact error matrix when the triple is too large to
    enumerate.
    """
    _check_run(rounds)
    profile = profile or error_profile(triple)
    pe = profile.pe
    n = triple.n
    keys = triple.key_dist
    K = len(keys)
    accept = np.array([[float(v) for v in row] for row in triple.referee.accept])
    materialize = K <= _MATERIALIZE_MAX_KEYS
    if materialize:
        key_cum = np.cumsum([float(w) for w in keys.weights])
        p_cum = np.stack([_cumulative(t) for t in triple.alice.tables])
        q_cum = np.stack([_cumulative(t) for t in triple.bob.tables])

    errors = false_neg = 0
    trace: list[RoundOutcome] = []
    for start in range(0, rounds, _CHUNK):
        count = min(_CHUNK, rounds - start)
        u = round_uniforms(seed, start, count)
        x, y = adversary.choose(n, u[:, 1], start, pe)
        if materialize:
            xi = np.minimum(np.searchsorted(key_cum, u[:, 0], side="right"), K - 1)
            a = _pick(p_cum[xi, x], u[:, 2])
            b = _pick(q_cum[xi, y], u[:, 3])
        else:
            # lazy keys are uniform by construction
            xi = np.minimum((u[:, 0] * K).astype(np.int64), K - 1)
            a = np.empty(count, dtype=np.int64)
            b = np.empty(count, dtype=np.int64)
            for i in range(count):
                k = int(xi[i])
                a[i] = _pick(_cumulative([triple.alice.tables[k][x[i]]]), u[i : i + 1, 2])[0]
                b[i] = _pick(_cumulative([triple.bob.tables[k][y[i]]]), u[i : i + 1, 3])[0]
        z = (u[:, 4] < accept[a, b]).astype(np.int64)
        eq = (x == y).astype(np.int64)
        wrong = z != eq
        errors += int(wrong.sum())
        false_neg += int((wrong & (eq == 1)).sum())
        if len(trace) < trace_cap:
            for i in range(min(count, trace_cap - len(trace))):
                trace.append(
                    RoundOutcome(start + i, int(xi[i]), int(x[i]), int(y[i]), int(a[i]), int(b[i]), int(z[i]), not wrong[i])
                )

    return SimulationReport(
        rounds=rounds,
        errors=errors,
        exact_target=adversary.exact_target(pe),
        seed=seed,
        false_negatives=false_neg,
        trace=trace,
    )


def quantum_error_profile(n: int, m: int) -> tuple[list[list[Fraction]], float]:
    """Exact error matrix of the permuted frame protocol and its numerical check.

    Averaging over relabelings gives every unequal pair the mean frame
    acceptance; the second value is that mean computed from the frame.
    """
    t = theorem6_error(n, m)
    pe = [[Fraction(0) if x == y else t for y in range(n)] for x in range(n)]
    acc = utof_frame(n, m).acceptance_table()
    mean = float(np.mean(acc[~np.eye(n, dtype=bool)])) if n > 1 else 0.0
    return pe, mean


def _snap(p: np.ndarray) -> np.ndarray:
    # Probabilities within numerical noise of 0 or 1 are exactly 0 or 1.
    p = np.clip(p, 0.0, 1.0)
    p[p >= 1 - UNITARY_TOL] = 1.0
    p[p <= 1e-20] = 0.0
    return p


def _unrank_columns(ranks: np.ndarray, n: int) -> np.ndarray:
    # Vectorized Lehmer unranking, one permutation per row.
    count = len(ranks)
    perms = np.empty((count, n), dtype=np.int64)
    avail = np.ones((count, n), dtype=bool)
    rem = ranks.copy()
    rows = np.arange(count)
    for i in range(n):
        f = math.factorial(n - 1 - i)
        digit = rem // f
        rem = rem % f
        pos = np.cumsum(avail, axis=1)
        choice = np.argmax(avail & (pos == (digit + 1)[:, None]), axis=1)
        perms[:, i] = choice
        avail[rows, choice] = False
    return perms


def run_quantum(
    n: int,
    m: int,
    adversary: AdversaryModel,
    rounds: int,
    seed: int,
    *,
    statevector: bool = False,
    trace_cap: int = 0,
) -> SimulationReport:
    """Simulate the permuted frame protocol for ``n >= m**2`` messages.

    Each round draws a shared permutation (rank ``floor(u * n!)``), then
    samples the referee's outcome from the exactly computed probability
    ``|<psi+| conj(U_pi(x)) (x) U_pi(y) |psi+>|**2``.  With ``statevector``
    each probability is recomputed through the entangled state.
    """
    _check_run(rounds)
    if n < m * m:
        raise ValueError(f"frame protocol needs n >= m**2 (n={n}, m={m})")
    if math.factorial(n) >= 2**53:
        raise ValueError("permutation ranks beyond 2**53 are not supported (n <= 18)")
    frame = utof_frame(n, m)
    table = _snap(frame.acceptance_table())
    pe, _ = quantum_error_profile(n, m)
    nfact = math.factorial(n)

    errors = false_neg = 0
    trace: list[RoundOutcome] = []
    for start in range(0, rounds, _CHUNK):
        count = min(_CHUNK, rounds - start)
        u = round_uniforms(seed, start, count)
        x, y = adversary.choose(n, u[:, 1], start, pe)
        ranks = np.minimum((u[:, 0] * nfact).astype(np.int64), nfact - 1)
        perms = _unrank_columns(ranks, n)
        rows = np.arange(count)
        px, py = perms[rows, x], perms[rows, y]
        if statevector:
            prob = np.array(
                [
                    simulate_theorem6_round(n, m, PermutationKey(tuple(perms[i]), int(ranks[i])), int(x[i]), int(y[i]), frame)
                    for i in range(count)
                ]
            )
            prob = _snap(prob)
        else:
            prob = table[px, py]
        z = (u[:, 4] < prob).astype(np.int64)
        eq = (x == y).astype(np.int64)
        wrong = z != eq
        errors += int(wrong.sum())
        false_neg += int((wrong & (eq == 1)).sum())
        if len(trace) < trace_cap:
            for i in range(min(count, trace_cap - len(trace))):
                trace.append(RoundOutcome(start + i, int(ranks[i]), int(x[i]), int(y[i]), -1, -1, int(z[i]), not wrong[i]))

    return SimulationReport(
        rounds=rounds,
        errors=errors,
        exact_target=adversary.exact_target(pe),
        seed=seed,
        false_negatives=false_neg,
        trace=trace,
    )


def trace_to_csv(trace: Sequence[RoundOutcome]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["round", "key", "x", "y", "a", "b", "z", "correct"])
    for r in trace:
        w.writerow([r.round, r.key, r.x, r.y, r.a, r.b, r.z, int(r.correct)])
    return buf.getvalue()
