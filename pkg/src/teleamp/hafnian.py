"""Hafnians and photon-number statistics of zero-mean Gaussian states."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .gaussian import ComplexGaussianData, GaussianState, is_vacuum, reduce, to_complex_data
from .herald import HeraldSpec

__all__ = [
    "hafnian",
    "hafnian_naive",
    "hafnian_repeated",
    "pattern_probability",
    "pure_amplitude",
    "conditional_distribution",
    "OutputDistribution",
    "NegativeProbabilityWarning",
]

PhotonPattern = Union[Sequence[int], Mapping[int, int]]


class NegativeProbabilityWarning(RuntimeWarning):
    """Roundoff produced a probability below -1e-9 before clamping."""


def _check_symmetric(A: np.ndarray) -> None:
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    if A.shape[0] % 2:
        raise ValueError("hafnian of an odd-dimensional matrix")
    scale = max(1.0, float(np.abs(A).max())) if A.size else 1.0
    if A.size and np.abs(A - A.T).max() > 1e-10 * scale:
        raise ValueError("matrix is not symmetric")


def hafnian(A: np.ndarray) -> complex:
    """Hafnian by the power-trace formula.

    Pairs index ``i`` with ``i + n`` and sums over subsets of pairs, each term
    being the ``lambda**n`` coefficient of ``exp(sum_k tr((A X)^k) lambda^k / 2k)``
    on the selected block. Traces come from eigenvalues, evaluated batched over
    all subsets of equal size.
    """
    A = np.asarray(A, dtype=complex)
    _check_symmetric(A)
    n = A.shape[0] // 2
    if n == 0:
        return 1.0 + 0j
    total = 0j
    for s in range(1, n + 1):
        combos = np.array(list(itertools.combinations(range(n), s)))
        rows = np.concatenate([combos, combos + n], axis=1)
        cols = np.concatenate([combos + n, combos], axis=1)
        C = A[rows[:, :, None], cols[:, None, :]]
        total += (-1) ** (n - s) * _series_coefficient(_power_sums(C, n), n).sum()
    return complex(total)


def _series_coefficient(power: np.ndarray, N: int) -> np.ndarray:
    """``lambda**N`` coefficient of ``exp(sum_k power[:, k-1] lambda^k / 2k)`` per row."""
    kc = power / 2
    e = np.zeros((power.shape[0], N + 1), dtype=complex)
    e[:, 0] = 1.0
    for m in range(1, N + 1):
        e[:, m] = (kc[:, :m] * e[:, m - 1 :: -1][:, :m]).sum(axis=1) / m
    return e[:, N]


def _power_sums(C: np.ndarray, N: int) -> np.ndarray:
    lam = np.linalg.eigvals(C)
    power = np.empty((C.shape[0], N), dtype=complex)
    lp = lam.copy()
    for k in range(N):
        power[:, k] = lp.sum(axis=1)
        lp *= lam
    return power


def hafnian_repeated(A: np.ndarray, counts: Sequence[int]) -> complex:
    """Hafnian of ``A`` with mode ``i`` and ``i + M`` each repeated ``counts[i]`` times.

    ``A`` is ``2M x 2M``. Equals ``hafnian(A[idx][:, idx])`` with
    ``idx = [i]*counts[i] ... + [i+M]*counts[i] ...`` but costs one small
    eigenproblem per multiplicity vector ``nu <= counts`` instead of one per
    subset of the repeated matrix.
    """
    A = np.asarray(A, dtype=complex)
    _check_symmetric(A)
    M = A.shape[0] // 2
    counts = [int(c) for c in counts]
    if len(counts) != M:
        raise ValueError("counts must have one entry per mode")
    N = sum(counts)
    if N == 0:
        return 1.0 + 0j
    X = np.roll(np.eye(2 * M), M, axis=1)
    AX = A @ X
    nus = np.array(list(itertools.product(*[range(c + 1) for c in counts])))
    nus = nus[nus.sum(axis=1) > 0]
    weights = np.prod([[math.comb(c, v) for c, v in zip(counts, nu)] for nu in nus], axis=1)
    signs = (-1.0) ** (N - nus.sum(axis=1))
    D = np.concatenate([nus, nus], axis=1).astype(float)
    C = AX[None, :, :] * D[:, None, :]
    coeff = _series_coefficient(_power_sums(C, N), N)
    return complex((signs * weights * coeff).sum())


def hafnian_naive(A: np.ndarray) -> complex:
    """Hafnian as an explicit sum over perfect matchings (dimension <= 14)."""
    A = np.asarray(A, dtype=complex)
    _check_symmetric(A)
    if A.shape[0] > 14:
        raise ValueError("hafnian_naive is limited to dimension 14")

    def rec(idx: tuple[int, ...]) -> complex:
        if not idx:
            return 1.0 + 0j
        i, rest = idx[0], idx[1:]
        return sum(A[i, j] * rec(rest[:k] + rest[k + 1 :]) for k, j in enumerate(rest))

    return complex(rec(tuple(range(A.shape[0]))))


def _pattern_counts(pattern: PhotonPattern, M: int) -> np.ndarray:
    if isinstance(pattern, Mapping):
        if set(pattern) != set(range(M)):
            raise ValueError(f"pattern must cover all {M} modes")
        counts = [pattern[m] for m in range(M)]
    else:
        counts = list(pattern)
        if len(counts) != M:
            raise ValueError(f"pattern must cover all {M} modes")
    counts = np.asarray(counts, dtype=int)
    if (counts < 0).any():
        raise ValueError("photon counts must be non-negative")
    return counts


def pattern_probability(data: ComplexGaussianData, pattern: PhotonPattern) -> float:
    """Probability of detecting ``pattern`` (one count per mode)."""
    M = data.mode_count
    counts = _pattern_counts(pattern, M)
    detQ = np.linalg.det(data.Q)
    if not np.isfinite(detQ) or detQ.real <= 0:
        raise ValueError("unphysical Husimi matrix")
    h = hafnian_repeated(data.A, counts)
    norm = np.sqrt(detQ.real) * np.prod([math.factorial(int(c)) for c in counts])
    p = h.real / norm
    if p < -1e-9:
        warnings.warn(f"probability {p:.3e} clamped to 0", NegativeProbabilityWarning, stacklevel=2)
    return max(float(p), 0.0)


def pure_amplitude(data: ComplexGaussianData, pattern: PhotonPattern) -> complex:
    """Fock amplitude of a pure state, with the vacuum amplitude taken real positive."""
    M = data.mode_count
    off = data.A[:M, M:]
    if np.abs(off).max(initial=0.0) > 1e-10:
        raise ValueError("state is not pure")
    counts = _pattern_counts(pattern, M)
    base = np.repeat(np.arange(M), counts)
    # A = B* (+) B in the (a, a^dag) basis; amplitudes use the second block
    B = data.A[M:, M:]
    h = hafnian(B[np.ix_(base, base)])
    vac = np.linalg.det(data.Q).real ** -0.25
    return complex(vac * h / np.sqrt(np.prod([math.factorial(int(c)) for c in counts])))


@dataclass
class OutputDistribution:
    """Photon-number distribution of the teleported mode under heralding.

    ``joint`` maps each accepted pattern's ``l`` to the unnormalized joint
    probabilities ``Pr(output = n, herald = pattern)`` for ``n <= cutoff``.
    ``empty`` flags an empirical distribution with no accepted shots.
    """

    probabilities: np.ndarray
    success_probability: float
    per_pattern_success: dict[int, float]
    errors: Optional[np.ndarray] = None
    joint: dict[int, np.ndarray] = field(default_factory=dict)
    counts: Optional[np.ndarray] = None
    empty: bool = False

    @property
    def cutoff(self) -> int:
        return len(self.probabilities) - 1

    def to_dict(self) -> dict:
        out = {
            "probabilities": [float(p) for p in self.probabilities],
            "success_probability": float(self.success_probability),
            "per_pattern_success": {str(l): float(v) for l, v in sorted(self.per_pattern_success.items())},
            "empty": self.empty,
        }
        if self.errors is not None:
            out["errors"] = [float(e) for e in self.errors]
        if self.counts is not None:
            out["counts"] = [int(c) for c in self.counts]
        return out


def conditional_distribution(
    state: GaussianState,
    herald: HeraldSpec,
    output_mode: int,
    cutoff: int,
) -> OutputDistribution:
    """Heralded photon-number distribution of ``output_mode``.

    The state is first reduced to the herald and output modes; the modes
    traced out must be vacuum, so that conditioning on them reading zero is
    the same as tracing them out.
    """
    if not herald.patterns:
        raise ValueError("herald has no accepted patterns")
    if output_mode in herald.modes:
        raise ValueError("output mode overlaps the herald modes")
    active = [herald.fock_mode, output_mode, *herald.pattern_modes]
    others = [m for m in range(state.mode_count) if m not in active]
    if others and not is_vacuum(state, others, tol=1e-10):
        raise ValueError("modes outside the herald and output must be vacuum")
    data = to_complex_data(reduce(state, active))
    joint = {}
    for pattern, l in herald.patterns:
        joint[l] = np.array(
            [pattern_probability(data, (herald.fock_count, n, *pattern)) for n in range(cutoff + 1)]
        )
    total = sum(joint.values())
    success = float(total.sum())
    if success <= 0:
        raise ValueError("heralding success probability vanishes")
    return OutputDistribution(
        probabilities=total / success,
        success_probability=success,
        per_pattern_success={l: float(v.sum()) for l, v in joint.items()},
        joint=joint,
    )
