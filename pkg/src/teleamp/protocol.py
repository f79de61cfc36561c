"""End-to-end teleamplification pipeline: configuration, loss model and simulation."""

from __future__ import annotations

import ast
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .analysis import GainRatios, fidelity, gain_ratios, kl_divergence
from .circuit import (
    BOREALIS_OUTPUT_MODE,
    CircuitIR,
    Loss,
    build_borealis_teleamp,
    build_ideal_teleamp,
    compile_schedule,
)
from .gaussian import GaussianState, apply_loss, run_schedule, squeeze, to_complex_data, vacuum
from .hafnian import OutputDistribution, conditional_distribution, pattern_probability
from .herald import HeraldSpec

__all__ = [
    "INPUT_MODELS",
    "DeviceCertificate",
    "load_certificate",
    "default_certificate",
    "TeleampConfig",
    "IdealTarget",
    "SimulationResult",
    "ideal_teleamplified",
    "ideal_teleamplified_distribution",
    "gain_tau_convert",
    "scale_loss",
    "scale_circuit_losses",
    "attenuated_input",
    "input_distribution",
    "simulate",
    "sweep",
    "pattern_phase_correction",
]

INPUT_MODELS = ("perfect_smsv", "attenuated_smsv")
RESOURCE_MODE = 2


@dataclass(frozen=True)
class DeviceCertificate:
    """Calibration snapshot of the time-bin device."""

    loop_phases: tuple[float, ...]
    schmidt_number: float
    common_efficiency: float
    loop_efficiencies: tuple[float, ...]
    squeezing_parameters_mean: dict
    relative_channel_efficiencies: tuple[float, ...]

    def __post_init__(self):
        for name in ("loop_phases", "loop_efficiencies", "relative_channel_efficiencies"):
            object.__setattr__(self, name, tuple(float(x) for x in getattr(self, name)))
        object.__setattr__(
            self, "squeezing_parameters_mean", {k: float(v) for k, v in dict(self.squeezing_parameters_mean).items()}
        )
        effs = (self.common_efficiency, *self.loop_efficiencies, *self.relative_channel_efficiencies)
        if any(not 0.0 <= e <= 1.0 for e in effs):
            raise ValueError("efficiencies must lie in [0, 1]")
        if not self.relative_channel_efficiencies:
            raise ValueError("at least one channel efficiency is required")

    @classmethod
    def from_dict(cls, data: dict) -> "DeviceCertificate":
        """Build from a parsed certificate; unknown fields are ignored."""
        names = ("loop_phases", "schmidt_number", "common_efficiency", "loop_efficiencies",
                 "squeezing_parameters_mean", "relative_channel_efficiencies")
        missing = [n for n in names if n not in data]
        if missing:
            raise ValueError(f"certificate lacks fields: {', '.join(missing)}")
        return cls(**{n: data[n] for n in names})

    def to_dict(self) -> dict:
        return asdict(self)

    def sha256(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()


def load_certificate(path) -> DeviceCertificate:
    """Read a certificate from JSON, or from a Python-literal dict as printed by the device API."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        try:
            data = ast.literal_eval(text.strip())
        except (ValueError, SyntaxError) as exc:
            raise ValueError(f"{path}: not a JSON or literal certificate ({exc})") from None
    if not isinstance(data, dict):
        raise ValueError(f"{path}: certificate must be a mapping")
    return DeviceCertificate.from_dict(data)


def default_certificate() -> DeviceCertificate:
    """Certificate of the device on the day of the reference run (bundled)."""
    ref = resources.files("teleamp").joinpath("data/borealis_certificate.json")
    return DeviceCertificate.from_dict(json.loads(ref.read_text(encoding="utf-8")))


def gain_tau_convert(g: Optional[float] = None, tau: Optional[float] = None) -> tuple[float, float]:
    """Return ``(g, tau)`` from either, with ``g = sqrt((1 - tau) / tau)``."""
    if (g is None) == (tau is None):
        raise ValueError("give exactly one of g and tau")
    if g is not None:
        if not g > 0 or not math.isfinite(g):
            raise ValueError("g must be positive")
        return float(g), 1.0 / (1.0 + g * g)
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    return math.sqrt((1.0 - tau) / tau), float(tau)


def scale_loss(eta: float, q: float) -> float:
    """Scale the loss ``1 - eta`` by ``q``: ``eta + (1 - eta)(1 - q)``."""
    if not (0.0 <= eta <= 1.0 and 0.0 <= q <= 1.0):
        raise ValueError("eta and q must lie in [0, 1]")
    return eta + (1.0 - eta) * (1.0 - q)


def scale_circuit_losses(circuit: CircuitIR, q: float, drop_labels: Sequence[str] = ()) -> CircuitIR:
    """Scale every loss by ``q``, removing those whose label is in ``drop_labels``."""
    out = []
    for el in circuit.elements:
        if isinstance(el, Loss):
            if el.label in drop_labels:
                continue
            el = Loss(el.mode, scale_loss(el.eta, q), el.label)
        out.append(el)
    return circuit.replace(out)


def attenuated_input(r: float, loop_eta: float, round_trips: int = 11) -> GaussianState:
    """Squeezed vacuum after ``round_trips`` passes of a loop with efficiency ``loop_eta``."""
    state = squeeze(vacuum(1), 0, r)
    return apply_loss(state, 0, loop_eta**round_trips)


def input_distribution(state: GaussianState, cutoff: int) -> np.ndarray:
    """Photon-number probabilities ``P(0..cutoff)`` of a single-mode state."""
    data = to_complex_data(state)
    return np.array([pattern_probability(data, [k]) for k in range(cutoff + 1)])


@dataclass(frozen=True)
class IdealTarget:
    """Ideal teleamplified state ``|g psi; n>``.

    ``probabilities`` is always set; ``coefficients`` only for pure inputs.
    """

    probabilities: np.ndarray
    coefficients: Optional[np.ndarray] = None

    def padded(self, length: int) -> np.ndarray:
        out = np.zeros(length)
        k = min(length, len(self.probabilities))
        out[:k] = self.probabilities[:k]
        return out


def ideal_teleamplified(psi: Sequence[complex], g: float, n: int) -> IdealTarget:
    """Truncate ``psi`` at ``n`` photons, scale ``psi_k`` by ``g**k`` and normalize."""
    psi = np.asarray(psi, dtype=complex)[: n + 1]
    c = psi * g ** np.arange(len(psi))
    norm = np.linalg.norm(c)
    if norm == 0:
        raise ValueError("state has no support up to the cutoff")
    c = c / norm
    return IdealTarget(np.abs(c) ** 2, c)


def ideal_teleamplified_distribution(p: Sequence[float], g: float, n: int) -> IdealTarget:
    """Photon-number form of :func:`ideal_teleamplified` for mixed inputs."""
    p = np.asarray(p, dtype=float)[: n + 1]
    w = p * g ** (2 * np.arange(len(p)))
    if w.sum() <= 0:
        raise ValueError("state has no support up to the cutoff")
    return IdealTarget(w / w.sum())


def pattern_phase_correction(coeffs: Sequence[complex], l: int, n: int = 2) -> np.ndarray:
    """Undo the pattern-dependent phase: multiply ``|k>`` by ``w**(l k)``, ``w = exp(2 pi i / (n+1))``.

    For ``k = 2`` and ``n = 2`` this is ``w**(-l)``.
    """
    if not 0 <= l <= n:
        raise ValueError(f"l must lie in 0..{n}")
    coeffs = np.asarray(coeffs, dtype=complex)
    w = np.exp(2j * np.pi / (n + 1))
    return coeffs * w ** (l * np.arange(len(coeffs)))


@dataclass(frozen=True)
class TeleampConfig:
    """Parameters of one simulated run.

    Attributes:
        r: Squeezing of the three input squeezed vacua.
        gain, tau: Give exactly one; ``g = sqrt((1 - tau) / tau)``.
        n: Cutoff order; 2 selects the 20-mode time-bin layout.
        cutoff: Largest output photon number reported.
        loss_scale: ``q``, multiplier on every loss probability.
        input_model: ``"perfect_smsv"`` keeps the storage passes of the
            resource state inside the circuit; ``"attenuated_smsv"`` replaces
            them by ``round_trips`` passes applied up front and left unscaled.
        round_trips: Passes of the up-front attenuation.
        patterns: ``l`` values of the accepted herald patterns (all if None).
    """

    r: float = 1.148
    gain: Optional[float] = None
    tau: Optional[float] = None
    n: int = 2
    cutoff: int = 8
    loss_scale: float = 1.0
    input_model: str = "attenuated_smsv"
    round_trips: int = 11
    patterns: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        gain_tau_convert(self.gain, self.tau)
        if not 0.0 <= self.loss_scale <= 1.0:
            raise ValueError("loss_scale must lie in [0, 1]")
        if self.input_model not in INPUT_MODELS:
            raise ValueError(f"input_model must be one of {INPUT_MODELS}")
        if self.n < 1 or self.cutoff < 0 or self.round_trips < 0:
            raise ValueError("n must be positive, cutoff and round_trips non-negative")
        if self.patterns is not None:
            object.__setattr__(self, "patterns", tuple(int(l) for l in self.patterns))

    @property
    def g(self) -> float:
        return gain_tau_convert(self.gain, self.tau)[0]

    @property
    def transmissivity(self) -> float:
        return gain_tau_convert(self.gain, self.tau)[1]

    def with_gain(self, g: float) -> "TeleampConfig":
        return replace(self, gain=g, tau=None)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["g"] = self.g
        d["tau"] = self.transmissivity
        return d


@dataclass
class SimulationResult:
    config: TeleampConfig
    distribution: OutputDistribution
    ideal: IdealTarget
    original: np.ndarray
    metrics: dict = field(default_factory=dict)

    @property
    def key(self) -> tuple[float, float]:
        return (self.config.g, self.config.loss_scale)

    def to_dict(self) -> dict:
        cutoff = self.config.cutoff
        return {
            "config": self.config.to_dict(),
            "distribution": self.distribution.to_dict(),
            "ideal": [float(p) for p in self.ideal.padded(cutoff + 1)],
            "original": [float(p) for p in self.original],
            "metrics": self.metrics,
        }


def _build(config: TeleampConfig, certificate: Optional[DeviceCertificate]) -> tuple[CircuitIR, HeraldSpec]:
    g, tau = config.g, config.transmissivity
    if config.n == 2:
        return build_borealis_teleamp(tau, certificate), HeraldSpec.borealis()
    circuit = build_ideal_teleamp(config.n, g)
    if certificate is not None:
        channels = certificate.relative_channel_efficiencies
        extra = []
        for m in range(circuit.mode_count):
            extra.append(Loss(m, certificate.common_efficiency, "common"))
            extra.append(Loss(m, channels[m % len(channels)], "channel"))
        circuit = circuit.replace(circuit.elements + tuple(extra))
    return circuit, HeraldSpec.ideal(config.n)


def simulate(config: TeleampConfig, certificate: Optional[DeviceCertificate] = None) -> SimulationResult:
    """Heralded output distribution of one configuration.

    Without a certificate the circuit is lossless. With one, the calibrated
    losses are scaled by ``config.loss_scale``. Metrics compare the output
    with the lossless teleamplification of the input model's resource state:
    ``fidelity`` on the full reported support, ``fidelity_012`` and ``kl`` on
    photon numbers 0-2 renormalized, and gain ratios against the input.
    """
    circuit, herald = _build(config, certificate)
    attenuated = config.input_model == "attenuated_smsv"
    circuit = scale_circuit_losses(circuit, config.loss_scale, ("input_storage",) if attenuated else ())
    loop_eta = certificate.loop_efficiencies[0] if certificate is not None else 1.0
    attenuation = loop_eta**config.round_trips if attenuated else 1.0

    state = vacuum(circuit.mode_count)
    for m in (0, 1, RESOURCE_MODE):
        state = squeeze(state, m, config.r)
    if attenuation != 1.0:
        state = apply_loss(state, RESOURCE_MODE, attenuation)
    state = run_schedule(state, compile_schedule(circuit))

    if config.patterns is not None:
        herald = herald.subset(config.patterns)
    dist = conditional_distribution(state, herald, BOREALIS_OUTPUT_MODE, config.cutoff)

    source = apply_loss(squeeze(vacuum(1), 0, config.r), 0, attenuation)
    original = input_distribution(source, config.cutoff)
    ideal = ideal_teleamplified_distribution(original, config.g, config.n)
    target = ideal.padded(config.cutoff + 1)
    ratios: GainRatios = gain_ratios(dist.probabilities, original)
    metrics = {
        "fidelity": fidelity(dist.probabilities, target),
        "fidelity_012": fidelity(dist.probabilities, target, support=3),
        "kl": kl_divergence(dist.probabilities, target),
        "success_probability": dist.success_probability,
        "gain_r1": ratios.r1,
        "gain_r2": ratios.r2,
    }
    return SimulationResult(config, dist, ideal, original, metrics)


def _simulate_args(args):
    return simulate(*args)


def sweep(
    template: TeleampConfig,
    gains: Sequence[float],
    loss_scales: Sequence[float],
    certificate: Optional[DeviceCertificate] = None,
    workers: int = 1,
) -> list[SimulationResult]:
    """Simulate every ``(g, q)`` pair; results are ordered by ``(g, q)``."""
    jobs = [
        (replace(template, gain=float(g), tau=None, loss_scale=float(q)), certificate)
        for g in gains
        for q in loss_scales
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_simulate_args, jobs))
    else:
        results = [simulate(*job) for job in jobs]
    return sorted(results, key=lambda res: res.key)
