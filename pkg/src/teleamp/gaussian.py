"""Zero-mean Gaussian states in the covariance-matrix formalism.

Conventions: hbar = 1, quadratures ordered ``(x_1..x_M, p_1..p_M)`` and the
vacuum covariance is ``I / 2``. Annihilation operators are
``a = (x + i p) / sqrt(2)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .circuit import Loss

__all__ = [
    "GaussianState",
    "ComplexGaussianData",
    "symplectic_form",
    "vacuum",
    "squeeze",
    "apply_passive",
    "passive_symplectic",
    "apply_loss",
    "to_complex_data",
    "run_schedule",
    "reduce",
    "is_vacuum",
    "symplectic_eigenvalues",
    "purity",
    "mean_photon_number",
    "uncertainty_min_eigenvalue",
]


def symplectic_form(M: int) -> np.ndarray:
    """Symplectic form in xxpp ordering."""
    I = np.eye(M)
    Z = np.zeros((M, M))
    return np.block([[Z, I], [-I, Z]])


@dataclass(frozen=True)
class GaussianState:
    """Zero-mean Gaussian state of ``M`` modes, given by its covariance matrix."""

    covariance: np.ndarray

    def __post_init__(self):
        cov = np.array(self.covariance, dtype=float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] % 2:
            raise ValueError("covariance must be a square matrix of even size")
        if not np.allclose(cov, cov.T, atol=1e-12, rtol=0):
            raise ValueError("covariance is not symmetric")
        cov = (cov + cov.T) / 2
        cov.setflags(write=False)
        object.__setattr__(self, "covariance", cov)

    @property
    def mode_count(self) -> int:
        return self.covariance.shape[0] // 2

    @property
    def mean(self) -> np.ndarray:
        return np.zeros(2 * self.mode_count)

    def is_physical(self, tol: float = 1e-10) -> bool:
        return uncertainty_min_eigenvalue(self) >= -tol


@dataclass(frozen=True)
class ComplexGaussianData:
    """Husimi matrix ``Q`` and adjacency matrix ``A`` in the ``(a, a^dag)`` basis."""

    Q: np.ndarray
    A: np.ndarray

    @property
    def mode_count(self) -> int:
        return self.Q.shape[0] // 2


def uncertainty_min_eigenvalue(state: GaussianState) -> float:
    """Smallest eigenvalue of ``cov + (i/2) Omega``; non-negative for physical states."""
    H = state.covariance + 0.5j * symplectic_form(state.mode_count)
    return float(np.linalg.eigvalsh(H).min())


def vacuum(M: int) -> GaussianState:
    if M < 1:
        raise ValueError("M must be at least 1")
    return GaussianState(np.eye(2 * M) / 2)


def _check_mode(state: GaussianState, mode: int) -> None:
    if not 0 <= mode < state.mode_count:
        raise ValueError(f"mode {mode} out of range for {state.mode_count} modes")


def squeeze(state: GaussianState, mode: int, r: float, phi: float = 0.0) -> GaussianState:
    """Single-mode squeezing ``S(r e^{i phi})`` on ``mode``.

    For ``phi = 0`` the x quadrature is squeezed and the Fock expansion of a
    squeezed vacuum has ``|2k>`` amplitudes proportional to ``(-tanh r)^k``.
    """
    _check_mode(state, mode)
    M = state.mode_count
    c, s = np.cosh(r), np.sinh(r)
    block = np.array(
        [[c - s * np.cos(phi), -s * np.sin(phi)], [-s * np.sin(phi), c + s * np.cos(phi)]]
    )
    S = np.eye(2 * M)
    idx = [mode, mode + M]
    S[np.ix_(idx, idx)] = block
    return GaussianState(S @ state.covariance @ S.T)


def passive_symplectic(U: np.ndarray) -> np.ndarray:
    """Orthogonal symplectic matrix of a passive interferometer ``U``."""
    return np.block([[U.real, -U.imag], [U.imag, U.real]])


def apply_passive(state: GaussianState, U: np.ndarray) -> GaussianState:
    """Evolve through the interferometer with transfer matrix ``U``."""
    U = np.asarray(U, dtype=complex)
    M = state.mode_count
    if U.shape != (M, M):
        raise ValueError(f"transfer matrix shape {U.shape} does not match {M} modes")
    if np.abs(U @ U.conj().T - np.eye(M)).max() > 1e-8:
        raise ValueError("transfer matrix is not unitary")
    S = passive_symplectic(U)
    return GaussianState(S @ state.covariance @ S.T)


def apply_loss(state: GaussianState, mode: int, eta: float) -> GaussianState:
    """Pure-loss channel of transmission ``eta`` on ``mode``."""
    _check_mode(state, mode)
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    M = state.mode_count
    cov = np.array(state.covariance)
    idx = [mode, mode + M]
    scale = np.ones(2 * M)
    scale[idx] = np.sqrt(eta)
    cov = cov * np.outer(scale, scale)
    cov[idx, idx] += (1.0 - eta) / 2
    return GaussianState(cov)


def to_complex_data(state: GaussianState) -> ComplexGaussianData:
    """Husimi and adjacency matrices used by the hafnian formula."""
    M = state.mode_count
    I = np.eye(M)
    W = np.block([[I, 1j * I], [I, -1j * I]]) / np.sqrt(2)
    sigma = W @ state.covariance @ W.conj().T
    Q = sigma + np.eye(2 * M) / 2
    X = np.block([[np.zeros((M, M)), I], [I, np.zeros((M, M))]])
    A = X @ (np.eye(2 * M) - np.linalg.inv(Q))
    A = (A + A.T) / 2
    return ComplexGaussianData(Q, A)


def run_schedule(state: GaussianState, steps: Iterable[Union[np.ndarray, Loss, tuple]]) -> GaussianState:
    """Apply unitary segments and losses in order.

    Each step is a transfer matrix, a :class:`~teleamp.circuit.Loss`, or a
    ``(mode, eta)`` pair.
    """
    for step in steps:
        if isinstance(step, Loss):
            state = apply_loss(state, step.mode, step.eta)
        elif isinstance(step, tuple):
            mode, eta = step
            state = apply_loss(state, mode, eta)
        else:
            state = apply_passive(state, step)
    return state


def reduce(state: GaussianState, modes: Sequence[int]) -> GaussianState:
    """Partial trace keeping ``modes`` in the given order."""
    M = state.mode_count
    for m in modes:
        _check_mode(state, m)
    idx = list(modes) + [m + M for m in modes]
    return GaussianState(state.covariance[np.ix_(idx, idx)])


def is_vacuum(state: GaussianState, modes: Sequence[int], tol: float = 1e-12) -> bool:
    """True if the listed modes are in vacuum and uncorrelated with the rest."""
    M = state.mode_count
    idx = list(modes) + [m + M for m in modes]
    target = np.zeros((len(idx), 2 * M))
    target[np.arange(len(idx)), idx] = 0.5
    return bool(np.abs(state.covariance[idx] - target).max() <= tol) if idx else True


def symplectic_eigenvalues(state: GaussianState) -> np.ndarray:
    """Sorted symplectic eigenvalues, each listed once."""
    M = state.mode_count
    ev = np.abs(np.linalg.eigvals(1j * symplectic_form(M) @ state.covariance))
    return np.sort(ev)[::2]


def purity(state: GaussianState) -> float:
    return float(1.0 / np.sqrt(np.linalg.det(2 * state.covariance)))


def mean_photon_number(state: GaussianState, mode: int) -> float:
    _check_mode(state, mode)
    M = state.mode_count
    return float((state.covariance[mode, mode] + state.covariance[mode + M, mode + M] - 1) / 2)
