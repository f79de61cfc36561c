"""Linear-optical circuits, time-bin loop compilation and the 20-mode teleamplifier layout.

Conventions
-----------
Modes are 0-indexed. Time bin ``k`` of a 1-indexed figure is mode ``k - 1`` here.

The transfer matrix ``U`` acts on annihilation operators, ``a_out = U a_in``.
Column ``j`` holds the amplitudes by which input mode ``j`` is distributed over
the output modes, so creation operators map as ``a_j^dag -> sum_i U_ij a_i^dag``.
Elements compose by left multiplication in execution order.

A :class:`BeamSplitter` on modes ``(a, b)`` with transmissivity ``T`` and phase
``phi`` acts on rows ``(a, b)`` with the block::

    [[ sqrt(T),               -exp(-1j*phi)*sqrt(1-T)],
     [ exp(1j*phi)*sqrt(1-T),  sqrt(T)               ]]

so ``T = 1`` is the identity and ``T = 0`` exchanges the two modes (with a sign).
A :class:`PhaseShift` multiplies its mode by ``exp(1j*theta)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

__all__ = [
    "BeamSplitter",
    "PhaseShift",
    "Loss",
    "Element",
    "CircuitError",
    "CircuitIR",
    "LoopSpec",
    "TimeBinProgram",
    "ValidationReport",
    "beamsplitter_block",
    "compile_transfer",
    "compile_schedule",
    "compile_timebin",
    "borealis_program",
    "build_borealis_teleamp",
    "build_fourier",
    "build_ideal_teleamp",
    "decompose_unitary",
    "extract_submatrix",
    "borealis_reference_matrix",
    "validate_reference",
    "circuit_to_dict",
    "circuit_from_dict",
    "circuit_to_json",
    "circuit_from_json",
    "BOREALIS_MODES",
    "BOREALIS_INPUTS",
    "BOREALIS_HERALD_MODE",
    "BOREALIS_OUTPUT_MODE",
    "BOREALIS_FOURIER_MODES",
]

BOREALIS_MODES = 20
BOREALIS_INPUTS = (0, 1, 2)
BOREALIS_HERALD_MODE = 0
BOREALIS_OUTPUT_MODE = 1
BOREALIS_FOURIER_MODES = (7, 13, 19)
# loop efficiencies of the certificate are listed per delay in this order
_LOOP_DELAYS = (1, 6, 36)


class CircuitError(ValueError):
    """Raised for structurally invalid circuits or time-bin programs."""


@dataclass(frozen=True)
class BeamSplitter:
    mode_a: int
    mode_b: int
    transmissivity: float
    phase: float = 0.0

    def modes(self) -> tuple[int, ...]:
        return (self.mode_a, self.mode_b)


@dataclass(frozen=True)
class PhaseShift:
    mode: int
    theta: float

    def modes(self) -> tuple[int, ...]:
        return (self.mode,)


@dataclass(frozen=True)
class Loss:
    """Pure-loss channel of transmission ``eta``.

    ``label`` records where the loss comes from (``"loop1"``, ``"common"``, ...)
    so that loss models can treat groups of elements differently.
    """

    mode: int
    eta: float
    label: str = ""

    def modes(self) -> tuple[int, ...]:
        return (self.mode,)


Element = Union[BeamSplitter, PhaseShift, Loss]


def _check_element(el: Element, mode_count: int) -> None:
    modes = el.modes()
    for m in modes:
        if not isinstance(m, (int, np.integer)) or m < 0 or m >= mode_count:
            raise CircuitError(f"{el!r}: mode index out of range for {mode_count} modes")
    if len(set(modes)) != len(modes):
        raise CircuitError(f"{el!r}: mode indices must be distinct")
    if isinstance(el, BeamSplitter) and not 0.0 <= el.transmissivity <= 1.0:
        raise CircuitError(f"{el!r}: transmissivity outside [0, 1]")
    if isinstance(el, Loss) and not 0.0 <= el.eta <= 1.0:
        raise CircuitError(f"{el!r}: eta outside [0, 1]")
    if not isinstance(el, (BeamSplitter, PhaseShift, Loss)):
        raise CircuitError(f"unknown element {el!r}")


@dataclass(frozen=True)
class CircuitIR:
    """Ordered list of optical elements over ``mode_count`` modes."""

    mode_count: int
    elements: tuple[Element, ...] = ()

    def __post_init__(self):
        if int(self.mode_count) < 1:
            raise CircuitError("mode_count must be positive")
        object.__setattr__(self, "elements", tuple(self.elements))
        for el in self.elements:
            _check_element(el, self.mode_count)

    def __len__(self) -> int:
        return len(self.elements)

    def losses(self) -> list[Loss]:
        return [el for el in self.elements if isinstance(el, Loss)]

    def replace(self, elements: Iterable[Element]) -> "CircuitIR":
        return CircuitIR(self.mode_count, tuple(elements))


def beamsplitter_block(transmissivity: float, phase: float = 0.0) -> np.ndarray:
    """2x2 block of a beam splitter in the package convention."""
    t = np.sqrt(transmissivity)
    r = np.sqrt(1.0 - transmissivity)
    return np.array(
        [[t, -np.exp(-1j * phase) * r], [np.exp(1j * phase) * r, t]], dtype=complex
    )


def _apply_element(U: np.ndarray, el: Element) -> None:
    if isinstance(el, PhaseShift):
        U[el.mode] *= np.exp(1j * el.theta)
    elif isinstance(el, BeamSplitter):
        rows = [el.mode_a, el.mode_b]
        U[rows] = beamsplitter_block(el.transmissivity, el.phase) @ U[rows]


def compile_transfer(circuit: CircuitIR) -> tuple[np.ndarray, list[tuple[int, int, float]]]:
    """Transfer matrix of the unitary elements plus the ordered loss schedule.

    Returns:
        ``(U, schedule)`` where ``schedule`` lists ``(position, mode, eta)`` for
        every :class:`Loss`, ``position`` being the element index in the circuit.
        Losses are not folded into ``U``.
    """
    if not isinstance(circuit, CircuitIR):
        raise CircuitError("expected a CircuitIR")
    U = np.eye(circuit.mode_count, dtype=complex)
    schedule = []
    for pos, el in enumerate(circuit.elements):
        if isinstance(el, Loss):
            schedule.append((pos, el.mode, float(el.eta)))
        else:
            _apply_element(U, el)
    return U, schedule


def compile_schedule(circuit: CircuitIR) -> list[Union[np.ndarray, Loss]]:
    """Split a circuit into unitary segments interleaved with its losses.

    Consecutive unitary elements are multiplied into one matrix; each
    :class:`Loss` is kept as is. The result feeds
    :func:`teleamp.gaussian.run_schedule`.
    """
    steps: list[Union[np.ndarray, Loss]] = []
    U = None
    for el in circuit.elements:
        if isinstance(el, Loss):
            if U is not None:
                steps.append(U)
                U = None
            steps.append(el)
        else:
            if U is None:
                U = np.eye(circuit.mode_count, dtype=complex)
            _apply_element(U, el)
    if U is not None:
        steps.append(U)
    return steps


@dataclass(frozen=True)
class LoopSpec:
    """One delay loop of a time-bin program.

    ``per_bin_transmissivity[t]`` and ``per_bin_phase[t]`` program the coupler
    met by incoming bin ``t + delay`` while bin ``t`` is stored; the phase acts
    on the incoming bin before the coupler. ``per_bin_bs_phase`` is the phase
    of that coupler's beam-splitter block (zeros when omitted).
    """

    delay: int
    per_bin_transmissivity: tuple[float, ...]
    per_bin_phase: tuple[float, ...]
    loop_loss_eta: float = 1.0
    loop_phase: float = 0.0
    per_bin_bs_phase: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "per_bin_transmissivity", tuple(map(float, self.per_bin_transmissivity)))
        object.__setattr__(self, "per_bin_phase", tuple(map(float, self.per_bin_phase)))
        if self.per_bin_bs_phase is None:
            object.__setattr__(self, "per_bin_bs_phase", (0.0,) * len(self.per_bin_transmissivity))
        else:
            object.__setattr__(self, "per_bin_bs_phase", tuple(map(float, self.per_bin_bs_phase)))
        if self.delay < 1:
            raise CircuitError("loop delay must be positive")
        if not 0.0 <= self.loop_loss_eta <= 1.0:
            raise CircuitError("loop_loss_eta outside [0, 1]")

    def stored(self, t: int, time_bins: int) -> bool:
        """Whether bin ``t`` spends a round trip in this loop.

        A bin is stored when it is the loop content at an active coupler, or
        when an active coupler routed it in ``delay`` bins earlier. Couplers
        with unit transmissivity are idle, and bins meeting only idle couplers
        are treated as bypassing the loop.
        """
        d = self.delay
        T = self.per_bin_transmissivity
        here = t + d < time_bins and T[t] != 1.0
        before = t - d >= 0 and T[t - d] != 1.0
        return here or before


@dataclass(frozen=True)
class TimeBinProgram:
    time_bins: int
    loops: tuple[LoopSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "loops", tuple(self.loops))
        if self.time_bins < 1:
            raise CircuitError("time_bins must be positive")
        delays = [lp.delay for lp in self.loops]
        if any(b <= a for a, b in zip(delays, delays[1:])):
            raise CircuitError("loop delays must be strictly increasing")
        for lp in self.loops:
            for name in ("per_bin_transmissivity", "per_bin_phase", "per_bin_bs_phase"):
                if len(getattr(lp, name)) != self.time_bins:
                    raise CircuitError(f"loop delay {lp.delay}: {name} must have length {self.time_bins}")
            if any(not 0.0 <= T <= 1.0 for T in lp.per_bin_transmissivity):
                raise CircuitError(f"loop delay {lp.delay}: transmissivity outside [0, 1]")


def compile_timebin(program: TimeBinProgram) -> CircuitIR:
    """Unravel the loops of a time-bin program into a static circuit.

    For each loop of delay ``d`` and each bin ``t``: stored bins first pick up
    one pass of loop loss and the loop phase, then the incoming bin ``t + d``
    gets its programmed phase and meets bin ``t`` on the coupler. After the
    coupler, wire ``t`` carries the bin that leaves the loop and wire
    ``t + d`` the bin that stays stored. Loss elements are labelled
    ``"loop<d>"``.
    """
    N = program.time_bins
    elements: list[Element] = []
    for lp in program.loops:
        d = lp.delay
        for t in range(N):
            T = lp.per_bin_transmissivity[t]
            theta = lp.per_bin_phase[t]
            if lp.stored(t, N):
                if lp.loop_loss_eta != 1.0:
                    elements.append(Loss(t, lp.loop_loss_eta, f"loop{d}"))
                if lp.loop_phase != 0.0:
                    elements.append(PhaseShift(t, lp.loop_phase))
            if t + d >= N:
                if T != 1.0 or theta != 0.0:
                    raise CircuitError(f"loop delay {d}: bin {t} couples beyond the last time bin")
                continue
            if theta != 0.0:
                elements.append(PhaseShift(t + d, theta))
            if T != 1.0:
                elements.append(BeamSplitter(t, t + d, T, lp.per_bin_bs_phase[t]))
    return CircuitIR(N, tuple(elements))


def borealis_program(tau: float, loop_etas: Sequence[float] = (1.0, 1.0), loop_phases: Sequence[float] = (0.0, 0.0)) -> TimeBinProgram:
    """Time-bin program of the 20-bin teleamplifier at transmissivity ``tau``.

    Delay-1 loop: a symmetric coupler between bins 0 and 1 forms the two-mode
    squeezed pair, the resource state in bin 2 is stored until it meets bin 14
    on a balanced coupler, and bins 8 and 14 are routed with full-reflection
    couplers. Delay-6 loop: the ``1 - tau`` coupler between bins 1 and 7, then
    the 1/3 and 1/2 couplers of the three-mode Fourier stage on 7/13/19. The
    delay-36 loop is idle over 20 bins and is left out.
    """
    if not 0.0 < tau < 1.0:
        raise CircuitError("tau must lie in (0, 1)")
    N = BOREALIS_MODES
    pi = np.pi

    T1, ph1, bs1 = [1.0] * N, [0.0] * N, [0.0] * N
    T1[0], bs1[0] = 0.5, pi / 2
    for t in list(range(2, 13)) + list(range(14, 19)):
        T1[t], ph1[t] = 0.0, pi
    T1[13], ph1[13] = 0.5, pi

    T2, ph2, bs2 = [1.0] * N, [0.0] * N, [0.0] * N
    T2[1], ph2[1], bs2[1] = 1.0 - tau, pi, pi
    T2[7], ph2[7], bs2[7] = 1.0 / 3.0, pi, pi
    T2[13], ph2[13], bs2[13] = 0.5, 3 * pi / 2, pi

    loops = (
        LoopSpec(1, T1, ph1, loop_etas[0], loop_phases[0], bs1),
        LoopSpec(6, T2, ph2, loop_etas[1], loop_phases[1], bs2),
    )
    return TimeBinProgram(N, loops)


def build_borealis_teleamp(tau: float, certificate=None) -> CircuitIR:
    """20-mode teleamplification circuit at coupler transmissivity ``tau``.

    Inputs: squeezed vacua in modes 0, 1, 2; mode 0 is the Fock herald, mode 1
    carries the teleported state and modes 7, 13, 19 are the Fourier outputs.

    With a ``certificate`` (a :class:`teleamp.protocol.DeviceCertificate`),
    loop losses are inserted per stored round trip and every detected mode gets
    a ``"common"`` loss and a ``"channel"`` loss, the channel efficiency being
    ``relative_channel_efficiencies[mode % 16]``. Loop-1 passes of mode 2 before
    its first interaction are labelled ``"input_storage"``. Loop phases are
    assumed compensated by the device and are not inserted.
    """
    if certificate is None:
        return compile_timebin(borealis_program(tau))
    etas = tuple(float(e) for e in certificate.loop_efficiencies[:2])
    circuit = compile_timebin(borealis_program(tau, etas))
    elements = []
    for el in circuit.elements:
        if isinstance(el, Loss) and el.label == "loop1" and 2 <= el.mode <= 13:
            el = Loss(el.mode, el.eta, "input_storage")
        elements.append(el)
    channels = certificate.relative_channel_efficiencies
    for m in range(BOREALIS_MODES):
        elements.append(Loss(m, float(certificate.common_efficiency), "common"))
        elements.append(Loss(m, float(channels[m % len(channels)]), "channel"))
    return CircuitIR(BOREALIS_MODES, tuple(elements))


def build_fourier(n_plus_1: int) -> np.ndarray:
    """Discrete Fourier matrix ``F_jk = w**(j*k) / sqrt(N)`` with ``w = exp(2j*pi/N)``."""
    if n_plus_1 < 1:
        raise ValueError("n_plus_1 must be positive")
    j = np.arange(n_plus_1)
    w = np.exp(2j * np.pi / n_plus_1)
    return w ** np.outer(j, j) / np.sqrt(n_plus_1)


def decompose_unitary(V: np.ndarray, modes: Sequence[int]) -> list[Element]:
    """Beam splitters and phase shifts realizing unitary ``V`` on ``modes``.

    Plain Givens nulling of the lower triangle, column by column; no attempt
    is made to minimize depth. Returns elements in execution order.
    """
    V = np.array(V, dtype=complex)
    m = V.shape[0]
    if V.shape != (m, m) or len(modes) != m:
        raise ValueError("V must be square and match the number of modes")
    if not np.allclose(V @ V.conj().T, np.eye(m), atol=1e-10):
        raise ValueError("V is not unitary")
    nulling = []
    for c in range(m - 1):
        for j in range(m - 1, c, -1):
            i = j - 1
            vi, vj = V[i, c], V[j, c]
            norm = np.hypot(abs(vi), abs(vj))
            if abs(vj) < 1e-15:
                continue
            T = (abs(vi) / norm) ** 2
            phi = np.angle(-vj / vi) if abs(vi) > 1e-15 else np.angle(-vj)
            B = beamsplitter_block(T, phi)
            V[[i, j]] = B @ V[[i, j]]
            nulling.append((i, j, T, phi))
    # V is now diagonal; the original is the inverse nulling sequence applied after it
    out: list[Element] = [PhaseShift(modes[k], float(np.angle(V[k, k]))) for k in range(m) if abs(np.angle(V[k, k])) > 0]
    for i, j, T, phi in reversed(nulling):
        out.append(BeamSplitter(modes[i], modes[j], float(T), float(phi + np.pi)))
    return out


def build_ideal_teleamp(n: int, g: float) -> CircuitIR:
    """Lossless ``(n + 3)``-mode teleamplifier with gain ``g`` and cutoff ``n``.

    Layout: mode 0 heralds ``|n>`` by photon counting, mode 1 is the teleported
    output, mode 2 the resource state, modes 3..n+2 vacuum. A symmetric beam
    splitter on squeezed vacua in modes 0 and 1 forms the two-mode squeezed
    pair, a beam splitter of transmissivity ``g**2 / (1 + g**2)`` feeds mode 3
    from mode 1, and an ``(n + 1)``-mode Fourier transform acts on modes
    ``3, 4, ..., n + 2, 2`` in that order. Heralding asks for ``n`` photons in
    mode 0 and ``n`` single photons with one vacuum among the Fourier outputs.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if g <= 0:
        raise ValueError("g must be positive")
    tau = 1.0 / (1.0 + g * g)
    elements: list[Element] = [
        BeamSplitter(0, 1, 0.5, np.pi / 2),
        BeamSplitter(1, 3, 1.0 - tau, 0.0),
    ]
    elements += decompose_unitary(build_fourier(n + 1), ideal_fourier_modes(n))
    return CircuitIR(n + 3, tuple(elements))


def ideal_fourier_modes(n: int) -> tuple[int, ...]:
    """Fourier ports of :func:`build_ideal_teleamp`, in transform order."""
    return tuple(range(3, n + 3)) + (2,)


def extract_submatrix(U: np.ndarray, rows: Sequence[int], cols: Sequence[int]) -> np.ndarray:
    """Block of ``U`` with the given row and column indices."""
    U = np.asarray(U)
    rows, cols = list(rows), list(cols)
    for idx, size in ((rows, U.shape[0]), (cols, U.shape[1])):
        if any(not 0 <= k < size for k in idx):
            raise IndexError("submatrix index out of range")
    return U[np.ix_(rows, cols)]


def borealis_reference_matrix(tau: float) -> np.ndarray:
    """Reference 20x20 transfer matrix of the teleamplifier, symbolic in ``tau``."""
    s = np.sqrt
    U = np.zeros((BOREALIS_MODES, BOREALIS_MODES), dtype=complex)
    U[0, 0] = 1 / s(2)
    U[0, 1] = 1j / s(2)
    U[1, 0] = 1j * s(1 - tau) / s(2)
    U[1, 1] = s(1 - tau) / s(2)
    U[1, 8] = -s(tau)
    for r in list(range(2, 7)) + list(range(8, 13)) + list(range(14, 19)):
        U[r, r + 1] = 1
    for r, sign in ((7, -1), (13, 1), (19, -1)):
        U[r, 0] = sign * 1j * s(tau) / s(6)
        U[r, 1] = sign * s(tau) / s(6)
        U[r, 8] = sign * s(1 - tau) / s(3)
    U[7, 2] = -1 / s(3)
    U[7, 14] = -1 / s(3)
    U[13, 2] = -(3j + s(3)) / 6
    U[13, 14] = -(-3j + s(3)) / 6
    U[19, 2] = -(3j - s(3)) / 6
    U[19, 14] = -(-3j - s(3)) / 6
    return U


@dataclass(frozen=True)
class ValidationReport:
    """Entrywise comparison of a transfer matrix with the reference.

    ``failing`` holds 0-indexed ``(row, col, expected, actual)`` tuples; the
    text rendering uses 1-indexed rows and columns.
    """

    tau: float
    max_deviation: float
    tolerance: float
    failing: tuple[tuple[int, int, complex, complex], ...] = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return not self.failing

    def rows(self) -> list[int]:
        return sorted({r for r, _, _, _ in self.failing})

    def __str__(self) -> str:
        lines = [
            f"{'PASS' if self.passed else 'FAIL'} tau={self.tau:.6g} "
            f"max_deviation={self.max_deviation:.3e} tolerance={self.tolerance:.0e}"
        ]
        for r, c, exp, act in self.failing:
            lines.append(
                f"  entry ({r + 1},{c + 1}): expected {exp.real:+.12f}{exp.imag:+.12f}j "
                f"got {act.real:+.12f}{act.imag:+.12f}j"
            )
        return "\n".join(lines)


def validate_reference(U: np.ndarray, tau: float, tol: float = 1e-10) -> ValidationReport:
    """Compare ``U`` entrywise with :func:`borealis_reference_matrix` at ``tau``."""
    U = np.asarray(U, dtype=complex)
    if U.shape != (BOREALIS_MODES, BOREALIS_MODES):
        raise ValueError(f"expected a {BOREALIS_MODES}x{BOREALIS_MODES} matrix, got {U.shape}")
    ref = borealis_reference_matrix(tau)
    dev = np.abs(U - ref)
    failing = tuple(
        (int(r), int(c), complex(ref[r, c]), complex(U[r, c])) for r, c in zip(*np.nonzero(dev > tol))
    )
    return ValidationReport(float(tau), float(dev.max()), tol, failing)


def circuit_to_dict(circuit: CircuitIR) -> dict:
    elements = []
    for el in circuit.elements:
        if isinstance(el, BeamSplitter):
            elements.append({"kind": "bs", "modes": [el.mode_a, el.mode_b], "transmissivity": el.transmissivity, "phase": el.phase})
        elif isinstance(el, PhaseShift):
            elements.append({"kind": "ps", "mode": el.mode, "theta": el.theta})
        else:
            elements.append({"kind": "loss", "mode": el.mode, "eta": el.eta, "label": el.label})
    return {"modes": circuit.mode_count, "elements": elements}


def circuit_from_dict(data: dict) -> CircuitIR:
    elements: list[Element] = []
    for k, item in enumerate(data["elements"]):
        kind = item.get("kind")
        if kind == "bs":
            a, b = item["modes"]
            elements.append(BeamSplitter(int(a), int(b), float(item["transmissivity"]), float(item.get("phase", 0.0))))
        elif kind == "ps":
            elements.append(PhaseShift(int(item["mode"]), float(item["theta"])))
        elif kind == "loss":
            elements.append(Loss(int(item["mode"]), float(item["eta"]), str(item.get("label", ""))))
        else:
            raise CircuitError(f"element {k}: unknown kind {kind!r}")
    return CircuitIR(int(data["modes"]), tuple(elements))


def circuit_to_json(circuit: CircuitIR) -> str:
    return json.dumps(circuit_to_dict(circuit), indent=2)


def circuit_from_json(text: str) -> CircuitIR:
    return circuit_from_dict(json.loads(text))
