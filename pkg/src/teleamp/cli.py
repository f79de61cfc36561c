"""Command-line front end: ``teleamp {simulate,sweep,validate-circuit,analyze,synthesize}``.

Exit codes: 0 success, 1 numerical or validation failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .analysis import (
    HeraldSpec,
    RecordFormatError,
    fidelity,
    filter_heralded,
    gain_ratios,
    iter_records,
    kl_divergence,
    synthesize_records,
    write_csv,
    write_json,
    write_records,
)
from .circuit import (
    CircuitIR,
    PhaseShift,
    build_borealis_teleamp,
    build_fourier,
    compile_transfer,
    decompose_unitary,
    validate_reference,
)
from .protocol import DeviceCertificate, TeleampConfig, default_certificate, load_certificate, simulate, sweep

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2
CERT_ENV = "TELEAMP_CERT"
INPUT_MODEL_FLAGS = {"perfect": "perfect_smsv", "attenuated": "attenuated_smsv"}


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunManifest:
    command: str
    config: dict
    certificate_sha256: Optional[str]
    tool_version: str
    timestamp: str

    def to_dict(self) -> dict:
        return asdict(self)


def _timestamp() -> str:
    # SOURCE_DATE_EPOCH pins the timestamp for reproducible bundles
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    return t.isoformat(timespec="seconds")


def _manifest(command: str, config: dict, cert: Optional[DeviceCertificate]) -> RunManifest:
    return RunManifest(command, config, cert.sha256() if cert else None, __version__, _timestamp())


def parse_grid(text: str) -> list[float]:
    """Parse ``"a,b,c"``, ``"log:start:stop:num"`` or ``"lin:start:stop:num"``."""
    try:
        if text.startswith(("log:", "lin:")):
            kind, a, b, n = text.split(":")
            a, b, n = float(a), float(b), int(n)
            if n < 1:
                raise ValueError
            if kind == "log":
                if a <= 0 or b <= 0:
                    raise ValueError
                return [float(x) for x in np.logspace(np.log10(a), np.log10(b), n)]
            return [float(x) for x in np.linspace(a, b, n)]
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid grid {text!r}") from None


def _certificate(args) -> Optional[DeviceCertificate]:
    if getattr(args, "lossless", False):
        return None
    path = args.certificate or os.environ.get(CERT_ENV)
    if not path:
        return default_certificate()
    if not Path(path).is_file():
        raise UsageError(f"certificate not found: {path}")
    try:
        return load_certificate(path)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _add_model_flags(p: argparse.ArgumentParser, input_default: str) -> None:
    p.add_argument("--r", type=float, default=None, help="squeezing parameter (default: certificate 'high' level, else 1.148)")
    p.add_argument("--certificate", help=f"device certificate JSON (default: ${CERT_ENV} or the bundled one)")
    p.add_argument("--lossless", action="store_true", help="ignore the certificate and simulate without loss")
    p.add_argument("--cutoff", type=int, default=8)
    p.add_argument("--n", type=int, default=2, help="cutoff order; 2 uses the 20-mode time-bin layout")
    p.add_argument("--input-model", choices=sorted(INPUT_MODEL_FLAGS), default=input_default)
    p.add_argument("--round-trips", type=int, default=11)


def _add_gain_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--gain", type=float)
    g.add_argument("--tau", type=float)


def _config(args, cert, **extra) -> TeleampConfig:
    r = args.r
    if r is None:
        r = cert.squeezing_parameters_mean.get("high", 1.148) if cert else 1.148
    kw = dict(r=r, n=args.n, cutoff=args.cutoff, input_model=INPUT_MODEL_FLAGS[args.input_model], round_trips=args.round_trips)
    if "gain" not in extra and "tau" not in extra:
        kw.update(gain=getattr(args, "gain", None), tau=getattr(args, "tau", None))
    kw.update(extra)
    try:
        return TeleampConfig(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_simulate(args) -> int:
    cert = _certificate(args)
    out = Path(args.out)
    results = []
    for q in args.loss_scale:
        results.append(simulate(_config(args, cert, loss_scale=q), cert))
    manifest = _manifest("simulate", {**results[0].config.to_dict(), "loss_scales": args.loss_scale}, cert).to_dict()
    write_json(out / "distribution.json", {"manifest": manifest, "results": [r.to_dict() for r in results]})
    write_json(out / "metrics.json", {"manifest": manifest, "metrics": [{"q": r.config.loss_scale, **r.metrics} for r in results]})
    cutoff = args.cutoff
    header = ["series", "q"] + [f"P{k}" for k in range(cutoff + 1)]
    rows = [["original", ""] + list(results[0].original), ["ideal", ""] + list(results[0].ideal.padded(cutoff + 1))]
    rows += [["simulated", r.config.loss_scale] + list(r.distribution.probabilities) for r in results]
    write_csv(out / "distribution.csv", header, rows)
    write_json(out / "manifest.json", manifest)
    for r in results:
        m = r.metrics
        print(f"g={r.config.g:g} q={r.config.loss_scale:g} fidelity={m['fidelity']:.4f} kl={m['kl']:.3e} success={m['success_probability']:.3e}")
    return EXIT_OK


SWEEP_COLUMNS = ["gain", "q", "fidelity", "kl", "fidelity_012", "success_probability", "gain_r1", "gain_r2"]


def cmd_sweep(args) -> int:
    cert = _certificate(args)
    template = _config(args, cert, gain=1.0)
    results = sweep(template, args.gains, args.loss_scales, cert, workers=args.workers)
    out = Path(args.out)
    rows = [[r.config.g, r.config.loss_scale] + [r.metrics[c] for c in SWEEP_COLUMNS[2:]] for r in results]
    write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows)
    manifest = _manifest("sweep", {**template.to_dict(), "gains": args.gains, "loss_scales": args.loss_scales}, cert).to_dict()
    write_json(out / "sweep.json", {"manifest": manifest, "results": [r.to_dict() for r in results]})
    write_json(out / "manifest.json", manifest)
    print(f"{len(results)} cells written to {out / 'sweep.csv'}")
    return EXIT_OK


def cmd_validate(args) -> int:
    if args.fourier is not None:
        if args.fourier < 1:
            raise UsageError("--fourier must be positive")
        F = build_fourier(args.fourier)
        unitarity = float(np.abs(F @ F.conj().T - np.eye(args.fourier)).max())
        U, _ = compile_transfer(CircuitIR(args.fourier, tuple(decompose_unitary(F, range(args.fourier)))))
        compiled = float(np.abs(U - F).max())
        ok = unitarity < 1e-12 and compiled < 1e-10
        print(f"{'PASS' if ok else 'FAIL'} fourier N={args.fourier} unitarity_error={unitarity:.3e} compiled_deviation={compiled:.3e}")
        return EXIT_OK if ok else EXIT_FAILURE
    if args.tau is None:
        raise UsageError("give --tau or --fourier")
    if not 0.0 < args.tau < 1.0:
        raise UsageError("--tau must lie in (0, 1)")
    circuit = build_borealis_teleamp(args.tau)
    if args.drop_phase is not None:
        phases = [k for k, el in enumerate(circuit.elements) if isinstance(el, PhaseShift)]
        if not 0 <= args.drop_phase < len(phases):
            raise UsageError(f"--drop-phase must lie in 0..{len(phases) - 1}")
        skip = phases[args.drop_phase]
        circuit = circuit.replace(el for k, el in enumerate(circuit.elements) if k != skip)
    U, _ = compile_transfer(circuit)
    report = validate_reference(U, args.tau)
    print(report)
    return EXIT_OK if report.passed else EXIT_FAILURE


def cmd_analyze(args) -> int:
    cert = _certificate(args)
    path = Path(args.input)
    if not path.is_file():
        raise UsageError(f"input not found: {path}")
    herald = HeraldSpec.borealis(require_others_vacuum=not args.allow_other_modes)
    fmt = args.format
    try:
        dist, successes = filter_heralded(iter_records(path, fmt), herald, args.output_mode, args.cutoff)
    except RecordFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    config = _config(args, cert)
    out = Path(args.out)
    manifest = _manifest("analyze", {**config.to_dict(), "input": str(path)}, cert).to_dict()
    report = {"manifest": manifest, "empirical": dist.to_dict(), "success_counts": {str(l): c for l, c in successes.items()}}
    row = {"gain": config.g, "q": config.loss_scale, "successes": sum(successes.values())}
    if dist.empty:
        report["comparison"] = None
        print("no heralded shots found")
    else:
        pred = simulate(config, cert)
        ideal = pred.ideal.padded(args.cutoff + 1)
        ratios = gain_ratios(dist.probabilities, pred.original, counts=dist.counts)
        comparison = {
            "fidelity_vs_ideal": fidelity(dist.probabilities, ideal),
            "fidelity_vs_predicted": fidelity(dist.probabilities, pred.distribution.probabilities),
            "kl_vs_ideal": kl_divergence(dist.probabilities, ideal),
            "predicted": pred.distribution.to_dict(),
            "predicted_fidelity_vs_ideal": pred.metrics["fidelity"],
            "gain_ratios": ratios.to_dict(),
        }
        report["comparison"] = comparison
        row.update({k: comparison[k] for k in ("fidelity_vs_ideal", "fidelity_vs_predicted", "kl_vs_ideal")})
        row.update(ratios.to_dict())
        print(
            f"successes={row['successes']} fidelity_vs_ideal={comparison['fidelity_vs_ideal']:.4f} "
            f"(predicted {comparison['predicted_fidelity_vs_ideal']:.4f})"
        )
    write_json(out / "analysis.json", report)
    write_csv(out / "analysis.csv", list(row), [list(row.values())])
    write_json(out / "manifest.json", manifest)
    return EXIT_OK


def cmd_synthesize(args) -> int:
    cert = _certificate(args)
    config = _config(args, cert, loss_scale=args.loss_scale)
    res = simulate(config, cert)
    records = synthesize_records(res.distribution.joint, HeraldSpec.borealis(), args.shots, args.seed)
    write_records(args.out, records, args.format)
    print(f"{args.shots} shots written to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="teleamp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="heralded output distribution for one gain")
    _add_gain_flags(p)
    _add_model_flags(p, "attenuated")
    p.add_argument("--loss-scale", type=parse_grid, default=[1.0], help="q value(s): list or log:a:b:n")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="fidelity and KL over a gain x loss-scale grid")
    _add_model_flags(p, "attenuated")
    p.add_argument("--gains", type=parse_grid, default=[0.5, 1.0, 2.0, 4.0])
    p.add_argument("--loss-scales", type=parse_grid, default=parse_grid("log:1e-3:1:13"))
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate-circuit", help="compare the compiled circuit with the reference transfer matrix")
    p.add_argument("--tau", type=float)
    p.add_argument("--fourier", type=int, help="check an N-mode Fourier transform instead")
    p.add_argument("--drop-phase", type=int, help="fault injection: remove the k-th phase shift")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("analyze", help="postselect measured records and compare with predictions")
    _add_gain_flags(p)
    _add_model_flags(p, "attenuated")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=["jsonl", "csv"])
    p.add_argument("--output-mode", type=int, default=1)
    p.add_argument("--allow-other-modes", action="store_true", help="accept shots with photons outside the herald and output modes")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("synthesize", help="draw synthetic records from a simulated distribution")
    _add_gain_flags(p)
    _add_model_flags(p, "attenuated")
    p.add_argument("--loss-scale", type=float, default=1.0)
    p.add_argument("--shots", type=int, default=100000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=["jsonl", "csv"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synthesize)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"teleamp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"teleamp: failure: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
