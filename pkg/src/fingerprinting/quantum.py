"""Entanglement-assisted fingerprinting with unitary operator frames.

Alice applies ``conj(U_x)`` and Bob ``U_y`` to their halves of a maximally
entangled pair; the referee projects back onto that state.  The outcome-1
probability is ``|tr(U_x^dagger U_y)|**2 / m**2``.

Frame members use 0-based indices ``j, k in range(m)`` and ``x in range(n)``:

    <j|U_x|k> = m**-0.5 * exp(2 pi i j k / m + 2 pi i (j + m k) x / n)

which is a tight frame (potential ``n**2``) whenever ``n >= m**2`` and an
orthonormal operator basis when ``n == m**2``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .classical import PermutationKey

__all__ = [
    "UnitaryFrame",
    "UNITARY_TOL",
    "utof_frame",
    "is_unitary",
    "frame_potential",
    "random_unitary",
    "random_normalized_operators",
    "maximally_entangled",
    "trace_overlap",
    "entangled_overlap",
    "Theorem5Result",
    "theorem5_protocol",
    "theorem6_error",
    "AcceptanceStats",
    "theorem6_acceptance_stats",
    "simulate_theorem6_round",
    "permutation_averaged_error",
    "frame_to_json",
    "frame_to_csv",
    "ENTANGLED_MAX_DIM",
    "DENSE_SCAN_MAX_N",
]

UNITARY_TOL = 1e-12
ENTANGLED_MAX_DIM = 64
DENSE_SCAN_MAX_N = 4096
DENSE_SCAN_MAX_M = 16


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    u = np.asarray(u)
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))) <= tol


def frame_potential(members: np.ndarray) -> float:
    """``sum_{x,y} |tr(E_x^dagger E_y)|**2`` for a stack of operators."""
    members = np.asarray(members)
    flat = members.reshape(len(members), -1)
    gram = flat.conj() @ flat.T
    return float(np.sum(np.abs(gram) ** 2))


@dataclass(frozen=True)
class UnitaryFrame:
    n: int
    dim: int
    members: np.ndarray  # shape (n, dim, dim)

    def __post_init__(self):
        if self.members.shape != (self.n, self.dim, self.dim):
            raise ValueError(f"members have shape {self.members.shape}, expected {(self.n, self.dim, self.dim)}")

    def __getitem__(self, x: int) -> np.ndarray:
        return self.members[x]

    def __len__(self):
        return self.n

    def gram(self) -> np.ndarray:
        """``G[x, y] = tr(U_x^dagger U_y)``."""
        flat = self.members.reshape(self.n, -1)
        return flat.conj() @ flat.T

    def acceptance_table(self) -> np.ndarray:
        """Referee outcome-1 probability ``|tr(U_x^dagger U_y)|**2 / m**2`` for every pair."""
        return np.abs(self.gram()) ** 2 / self.dim**2

    def potential(self) -> float:
        return float(np.sum(np.abs(self.gram()) ** 2))

    def max_unitarity_error(self) -> float:
        eye = np.eye(self.dim)
        return max(float(np.max(np.abs(u.conj().T @ u - eye))) for u in self.members)

    def check(self, tol: float = UNITARY_TOL) -> None:
        """Raise if a member is not unitary or the normalization ``tr(U^dagger U) = m`` fails."""
        if self.max_unitarity_error() > tol:
            raise AssertionError(f"frame member not unitary within {tol}")
        norms = np.real(np.diagonal(self.gram()))
        if np.max(np.abs(norms - self.dim)) > tol * self.dim:
            raise AssertionError("frame members are not normalized to tr(U^dagger U) = m")


def utof_frame(n: int, m: int) -> UnitaryFrame:
    """The ``n``-member tight unitary operator frame in dimension ``m`` (``n >= m**2``)."""
    if m < 1 or n < m * m:
        raise ValueError(f"tight unitary frame needs n >= m**2 (n={n}, m={m})")
    j = np.arange(m)[:, None]
    k = np.arange(m)[None, :]
    x = np.arange(n)[:, None, None]
    phase = 2j * np.pi * (j * k / m + (j + m * k) * x / n)
    return UnitaryFrame(n, m, np.exp(phase) / math.sqrt(m))


def random_unitary(m: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Gaussian matrix."""
    z = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def random_normalized_operators(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` random complex operators scaled so that ``tr(E^dagger E) = m``."""
    ops = rng.standard_normal((n, m, m)) + 1j * rng.standard_normal((n, m, m))
    norms = np.sqrt(np.sum(np.abs(ops) ** 2, axis=(1, 2)) / m)
    return ops / norms[:, None, None]


def maximally_entangled(d: int) -> np.ndarray:
    """``d**-0.5 * sum_k |k>|k>`` as a length ``d**2`` vector (row-major ``|j>|k>``)."""
    psi = np.zeros(d * d, dtype=complex)
    psi[:: d + 1] = 1 / math.sqrt(d)
    return psi


def _check_pair(a: np.ndarray, b: np.ndarray) -> int:
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape != b.shape:
        raise ValueError(f"need two square matrices of equal size, got {a.shape} and {b.shape}")
    return a.shape[0]


def trace_overlap(a: np.ndarray, b: np.ndarray) -> complex:
    """``tr(A^dagger B) / m``."""
    a, b = np.asarray(a), np.asarray(b)
    m = _check_pair(a, b)
    return complex(np.vdot(a, b) / m)


def entangled_overlap(a: np.ndarray, b: np.ndarray) -> complex:
    """``<psi+| conj(A) (x) B |psi+>`` evaluated on explicit ``m**2``-dimensional vectors."""
    a, b = np.asarray(a), np.asarray(b)
    m = _check_pair(a, b)
    if m > ENTANGLED_MAX_DIM:
        raise ValueError(f"tensor evaluation capped at m <= {ENTANGLED_MAX_DIM}")
    psi = maximally_entangled(m)
    # (A (x) B) vec(X) = vec(A X B^T) for row-major vec
    state = (a.conj() @ psi.reshape(m, m) @ b.T).reshape(-1)
    return complex(np.vdot(psi, state))


@dataclass(frozen=True)
class Theorem5Result:
    n: int
    m: int
    acceptance: np.ndarray
    max_equal_deviation: float
    max_unequal_acceptance: float

    @property
    def error_free(self) -> bool:
        return self.max_equal_deviation <= 1e-12 and self.max_unequal_acceptance <= 1e-20


def theorem5_protocol(n: int, m: int) -> Theorem5Result:
    """Error-free protocol for ``n <= m**2`` using ``n`` members of an orthonormal operator basis.

    Every acceptance probability is computed through the entangled state.
    """
    if n > m * m:
        raise ValueError(f"error-free regime needs n <= m**2 (n={n}, m={m})")
    frame = utof_frame(m * m, m)
    acc = np.empty((n, n))
    for x in range(n):
        for y in range(n):
            acc[x, y] = abs(entangled_overlap(frame[x], frame[y])) ** 2
    diag = np.diagonal(acc)
    off = acc[~np.eye(n, dtype=bool)]
    return Theorem5Result(
        n=n,
        m=m,
        acceptance=acc,
        max_equal_deviation=float(np.max(np.abs(diag - 1))),
        max_unequal_acceptance=float(off.max()) if off.size else 0.0,
    )


def theorem6_error(n: int, m: int) -> Fraction:
    """Worst-case error ``(n/m**2 - 1)/(n - 1)`` of the permuted frame protocol; 0 when ``n <= m**2``."""
    if n < 1 or m < 1:
        raise ValueError("n and m must be >= 1")
    if n <= m * m:
        return Fraction(0)
    return (Fraction(n, m * m) - 1) / (n - 1)


@dataclass(frozen=True)
class AcceptanceStats:
    n: int
    m: int
    mean_unequal: float
    max_equal_deviation: float
    expected_mean: Fraction

    @property
    def deviation(self) -> float:
        return abs(self.mean_unequal - float(self.expected_mean))


def theorem6_acceptance_stats(n: int, m: int) -> AcceptanceStats:
    """Dense scan of frame acceptance probabilities over all ordered message pairs."""
    if n < m * m:
        raise ValueError(f"frame regime needs n >= m**2 (n={n}, m={m})")
    if n > DENSE_SCAN_MAX_N or m > DENSE_SCAN_MAX_M:
        raise ValueError(f"dense scan limited to n <= {DENSE_SCAN_MAX_N}, m <= {DENSE_SCAN_MAX_M}")
    acc = utof_frame(n, m).acceptance_table()
    diag = np.diagonal(acc).copy()
    off_sum = float(np.sum(acc)) - float(np.sum(diag))
    return AcceptanceStats(
        n=n,
        m=m,
        mean_unequal=off_sum / (n * n - n) if n > 1 else 0.0,
        max_equal_deviation=float(np.max(np.abs(diag - 1))),
        expected_mean=_expected_mean(n, m),
    )


def _expected_mean(n: int, m: int) -> Fraction:
    if n == 1:
        return Fraction(0)
    return (Fraction(n * n, m * m) - n) / (n * n - n)


def simulate_theorem6_round(
    n: int,
    m: int,
    key: PermutationKey,
    x: int,
    y: int,
    frame: UnitaryFrame | None = None,
) -> float:
    """Outcome-1 probability of one round with shared relabeling ``key``.

    The large shared entangled state of the protocol is used only to draw the
    uniform permutation, so it is represented by ``key`` directly.
    """
    if n < m * m:
        raise ValueError(f"frame regime needs n >= m**2 (n={n}, m={m})")
    if key.n != n or not (0 <= x < n and 0 <= y < n):
        raise IndexError(f"invalid round (n={n}, key over {key.n}, x={x}, y={y})")
    frame = frame if frame is not None else utof_frame(n, m)
    return abs(entangled_overlap(frame[key(x)], frame[key(y)])) ** 2


def permutation_averaged_error(n: int, m: int, x: int = 0, y: int = 1) -> float:
    """Error on unequal pair ``(x, y)`` averaged over all relabelings.

    A uniform permutation sends ``(x, y)`` to every ordered distinct pair
    ``(u, v)`` equally often, so the average runs over those ``n(n-1)`` pairs.
    """
    if x == y:
        raise ValueError("pair must be unequal")
    acc = utof_frame(n, m).acceptance_table()
    mask = ~np.eye(n, dtype=bool)
    return float(np.mean(acc[mask]))


def frame_to_json(frame: UnitaryFrame) -> dict:
    """Row-major dump: ``members[x][j][k] = [re, im]`` of ``<j|U_x|k>``."""
    return {
        "n": frame.n,
        "dim": frame.dim,
        "ordering": "members[x][j][k] = [re, im] of <j|U_x|k>, 0-based",
        "members": [
            [[[float(v.real), float(v.imag)] for v in row] for row in u] for u in frame.members
        ],
    }


def frame_to_csv(frame: UnitaryFrame) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "j", "k", "re", "im"])
    for x, u in enumerate(frame.members):
        for j in range(frame.dim):
            for k in range(frame.dim):
                w.writerow([x, j, k, repr(float(u[j, k].real)), repr(float(u[j, k].imag))])
    return buf.getvalue()
