"""Brute-force truncated Fock-space simulator used as an independent oracle.

States are sparse maps from occupation tuples to amplitudes. Two truncations
are available: ``cutoff`` bounds each mode, ``max_total`` bounds the total
photon number. Passive gates conserve the total, so with ``max_total`` every
sector at or below the bound is propagated exactly. Amplitudes dropped by the
per-mode cutoff are accumulated in ``leakage`` (squared norm).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .circuit import BeamSplitter, CircuitIR, Loss, PhaseShift, beamsplitter_block

__all__ = [
    "FockVector",
    "fock_vacuum",
    "prepare_smsv",
    "prepare_state",
    "tensor",
    "apply_bs",
    "apply_ps",
    "apply_circuit",
    "attach_loss_ancilla",
    "project",
    "marginal",
    "smsv_coefficients",
]


@dataclass(frozen=True)
class FockVector:
    """Sparse multimode state vector in a truncated Fock basis."""

    mode_count: int
    cutoff: int
    amplitudes: Mapping[tuple[int, ...], complex]
    max_total: Optional[int] = None
    leakage: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "amplitudes", dict(self.amplitudes))
        for key in self.amplitudes:
            if len(key) != self.mode_count:
                raise ValueError("occupation tuple length does not match mode_count")
            if max(key, default=0) > self.cutoff:
                raise ValueError("occupation exceeds cutoff")

    def norm2(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    def amplitude(self, occupation: Sequence[int]) -> complex:
        return complex(self.amplitudes.get(tuple(occupation), 0.0))

    def single_mode_coefficients(self) -> np.ndarray:
        """Dense amplitude vector of a one-mode state."""
        if self.mode_count != 1:
            raise ValueError("state has more than one mode")
        out = np.zeros(self.cutoff + 1, dtype=complex)
        for (n,), a in self.amplitudes.items():
            out[n] = a
        return out

    def _with(self, amplitudes, leakage=None, mode_count=None) -> "FockVector":
        return FockVector(
            self.mode_count if mode_count is None else mode_count,
            self.cutoff,
            amplitudes,
            self.max_total,
            self.leakage if leakage is None else leakage,
        )


def fock_vacuum(mode_count: int, cutoff: int, max_total: Optional[int] = None) -> FockVector:
    return FockVector(mode_count, cutoff, {(0,) * mode_count: 1.0 + 0j}, max_total)


def smsv_coefficients(r: float, phi: float, cutoff: int) -> np.ndarray:
    """Squeezed-vacuum amplitudes ``(-tanh r e^{i phi})^k sqrt((2k)!) / (2^k k!) / sqrt(cosh r)``."""
    c = np.zeros(cutoff + 1, dtype=complex)
    x = -np.tanh(r) * np.exp(1j * phi)
    for k in range(cutoff // 2 + 1):
        c[2 * k] = x**k * math.sqrt(math.factorial(2 * k)) / (2**k * math.factorial(k))
    return c / np.sqrt(np.cosh(r))


def prepare_state(coefficients: Sequence[complex], cutoff: Optional[int] = None) -> FockVector:
    """One-mode state with the given Fock amplitudes (not renormalized)."""
    coefficients = np.asarray(coefficients, dtype=complex)
    cutoff = len(coefficients) - 1 if cutoff is None else cutoff
    amps = {(n,): complex(a) for n, a in enumerate(coefficients[: cutoff + 1]) if a != 0}
    leak = float(np.sum(np.abs(coefficients[cutoff + 1 :]) ** 2))
    return FockVector(1, cutoff, amps, None, leak)


def prepare_smsv(r: float, phi: float, cutoff: int) -> FockVector:
    """Squeezed vacuum truncated at ``cutoff``; the lost tail is recorded as leakage."""
    c = smsv_coefficients(r, phi, cutoff)
    return FockVector(1, cutoff, {(n,): complex(a) for n, a in enumerate(c) if a != 0}, None, max(0.0, 1.0 - float(np.sum(np.abs(c) ** 2))))


def tensor(states: Iterable[FockVector], max_total: Optional[int] = None) -> FockVector:
    """Product state, keeping only sectors with at most ``max_total`` photons."""
    states = list(states)
    cutoff = max(s.cutoff for s in states)
    amps: dict[tuple[int, ...], complex] = {(): 1.0 + 0j}
    for s in states:
        nxt = {}
        for k1, a1 in amps.items():
            n1 = sum(k1)
            for k2, a2 in s.amplitudes.items():
                if max_total is not None and n1 + sum(k2) > max_total:
                    continue
                nxt[k1 + k2] = a1 * a2
        amps = nxt
    total_norm = np.prod([s.norm2() + s.leakage for s in states])
    kept = sum(abs(a) ** 2 for a in amps.values())
    leak = max(0.0, float(total_norm - kept))
    return FockVector(sum(s.mode_count for s in states), cutoff, amps, max_total, leak)


@lru_cache(maxsize=4096)
def _bs_table(na: int, nb: int, T: float, phase: float) -> tuple[tuple[int, complex], ...]:
    """Expansion of ``|na, nb>`` under a beam splitter as ``(k, amplitude)`` on ``|k, na+nb-k>``."""
    U = beamsplitter_block(T, phase)
    # a^dag -> U_aa a^dag + U_ba b^dag ; b^dag -> U_ab a^dag + U_bb b^dag
    poly_a = np.array([math.comb(na, k) * U[0, 0] ** k * U[1, 0] ** (na - k) for k in range(na + 1)])
    poly_b = np.array([math.comb(nb, k) * U[0, 1] ** k * U[1, 1] ** (nb - k) for k in range(nb + 1)])
    coeffs = np.convolve(poly_a, poly_b)
    N = na + nb
    norm = math.sqrt(math.factorial(na) * math.factorial(nb))
    out = []
    for k, c in enumerate(coeffs):
        amp = c * math.sqrt(math.factorial(k) * math.factorial(N - k)) / norm
        if amp != 0:
            out.append((k, complex(amp)))
    return tuple(out)


def apply_bs(state: FockVector, a: int, b: int, T: float, phase: float = 0.0) -> FockVector:
    """Beam splitter in the package convention (see :mod:`teleamp.circuit`)."""
    if a == b or not (0 <= a < state.mode_count and 0 <= b < state.mode_count):
        raise ValueError("invalid beam-splitter modes")
    if T == 1.0:
        return state
    out: dict[tuple[int, ...], complex] = {}
    leak = 0.0
    if T == 0.0:
        # exchange with signs: a -> e^{i phi} b, b -> -e^{-i phi} a
        fa, fb = np.exp(1j * phase), -np.exp(-1j * phase)
        for key, amp in state.amplitudes.items():
            na, nb = key[a], key[b]
            new = list(key)
            new[a], new[b] = nb, na
            if na > state.cutoff or nb > state.cutoff:
                continue
            out[tuple(new)] = amp * fa**na * fb**nb
        return state._with(out)
    for key, amp in state.amplitudes.items():
        na, nb = key[a], key[b]
        base = list(key)
        for k, c in _bs_table(na, nb, float(T), float(phase)):
            m = na + nb - k
            if k > state.cutoff or m > state.cutoff:
                leak += abs(amp * c) ** 2
                continue
            base[a], base[b] = k, m
            t = tuple(base)
            out[t] = out.get(t, 0j) + amp * c
    return state._with(out, state.leakage + leak)


def apply_ps(state: FockVector, m: int, theta: float) -> FockVector:
    if not 0 <= m < state.mode_count:
        raise ValueError("invalid mode")
    return state._with({k: a * np.exp(1j * theta * k[m]) for k, a in state.amplitudes.items()})


def attach_loss_ancilla(state: FockVector, mode: int, eta: float) -> FockVector:
    """Mix ``mode`` with a fresh vacuum ancilla (appended last) on a beam splitter of transmissivity ``eta``."""
    widened = state._with({k + (0,): a for k, a in state.amplitudes.items()}, mode_count=state.mode_count + 1)
    return apply_bs(widened, mode, state.mode_count, eta, 0.0)


def apply_circuit(state: FockVector, circuit: CircuitIR) -> FockVector:
    """Run a circuit; each :class:`~teleamp.circuit.Loss` attaches one ancilla mode."""
    if circuit.mode_count > state.mode_count:
        raise ValueError("circuit has more modes than the state")
    for el in circuit.elements:
        if isinstance(el, BeamSplitter):
            state = apply_bs(state, el.mode_a, el.mode_b, el.transmissivity, el.phase)
        elif isinstance(el, PhaseShift):
            state = apply_ps(state, el.mode, el.theta)
        elif isinstance(el, Loss):
            if el.eta != 1.0:
                state = attach_loss_ancilla(state, el.mode, el.eta)
    return state


def project(state: FockVector, modes: Sequence[int], counts: Sequence[int]) -> tuple[FockVector, float]:
    """Project ``modes`` onto ``counts``; returns the remaining state and its squared norm."""
    if len(modes) != len(counts):
        raise ValueError("modes and counts differ in length")
    modes = list(modes)
    keep = [m for m in range(state.mode_count) if m not in modes]
    out = {}
    for key, amp in state.amplitudes.items():
        if all(key[m] == c for m, c in zip(modes, counts)):
            out[tuple(key[m] for m in keep)] = amp
    reduced = FockVector(len(keep), state.cutoff, out, state.max_total, state.leakage)
    return reduced, reduced.norm2()


def marginal(state: FockVector, modes: Sequence[int]) -> dict[tuple[int, ...], float]:
    """Photon-number probabilities of ``modes``, summing over every other mode."""
    out: dict[tuple[int, ...], float] = {}
    for key, amp in state.amplitudes.items():
        k = tuple(key[m] for m in modes)
        out[k] = out.get(k, 0.0) + abs(amp) ** 2
    return out
