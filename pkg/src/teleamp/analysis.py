"""Distribution metrics and ingestion of measured detector records."""

from __future__ import annotations

import csv
import json
import math
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from .hafnian import OutputDistribution
from .herald import HeraldSpec

__all__ = [
    "HeraldSpec",
    "MeasurementRecord",
    "RecordFormatError",
    "InfiniteDivergenceWarning",
    "GainRatios",
    "HeraldTally",
    "fidelity",
    "kl_divergence",
    "gain_ratios",
    "poisson_errors",
    "iter_records",
    "load_records",
    "write_records",
    "count_heralded",
    "filter_heralded",
    "synthesize_records",
    "write_json",
    "write_csv",
]

RECORD_MODES = 20


class RecordFormatError(ValueError):
    """Malformed measurement record; the message carries the line number."""


class InfiniteDivergenceWarning(RuntimeWarning):
    """The reference vanishes where the distribution does not."""


def _restrict(p: Sequence[float], support: Optional[int]) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if support is None:
        return p
    p = p[:support]
    s = p.sum()
    if s <= 0:
        raise ValueError("distribution vanishes on the requested support")
    return p / s


def fidelity(p: Sequence[float], q: Sequence[float], support: Optional[int] = None) -> float:
    """Classical fidelity ``(sum_i sqrt(p_i q_i))**2`` of two photon-number distributions.

    Args:
        p, q: Distributions of equal length, each normalized to 1e-9.
        support: If given, both are restricted to the first ``support`` bins
            and renormalized first.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("distributions must have the same length")
    if (p < 0).any() or (q < 0).any():
        raise ValueError("distributions must be non-negative")
    if support is None:
        for x in (p, q):
            if abs(x.sum() - 1.0) > 1e-9:
                raise ValueError("distributions must be normalized")
    p, q = _restrict(p, support), _restrict(q, support)
    return float(min(1.0, np.sqrt(p * q).sum() ** 2))


def kl_divergence(p: Sequence[float], q: Sequence[float], support: int = 3, full: bool = False) -> float:
    """Relative entropy ``D(p || q)`` in nats.

    By default both distributions are restricted to photon numbers 0-2 and
    renormalized; ``full=True`` uses every bin. Returns ``inf`` (with a
    warning) when ``q`` vanishes where ``p`` does not.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("distributions must have the same length")
    if (p < 0).any() or (q < 0).any():
        raise ValueError("distributions must be non-negative")
    s = len(p) if full else support
    p, q = _restrict(p, s), _restrict(q, s)
    mask = p > 0
    if (q[mask] == 0).any():
        warnings.warn("reference vanishes on the support of p", InfiniteDivergenceWarning, stacklevel=2)
        return math.inf
    return float(max(0.0, np.sum(p[mask] * np.log(p[mask] / q[mask]))))


@dataclass(frozen=True)
class GainRatios:
    """``P(k)/P(0)`` of a distribution divided by the same ratio of a reference.

    A ratio is ``None`` when the reference has ``P(k) = 0``.
    """

    r1: Optional[float]
    r2: Optional[float]
    r1_error: Optional[float] = None
    r2_error: Optional[float] = None

    def to_dict(self) -> dict:
        return {"r1": self.r1, "r2": self.r2, "r1_error": self.r1_error, "r2_error": self.r2_error}


def gain_ratios(
    dist: Sequence[float],
    reference: Sequence[float],
    counts: Optional[Sequence[int]] = None,
    reference_counts: Optional[Sequence[int]] = None,
) -> GainRatios:
    """Gain of ``P(1)/P(0)`` and ``P(2)/P(0)`` relative to ``reference``.

    With ``counts`` the errors follow from independent Poisson counts,
    ``rel_err = sqrt(1/N_k + 1/N_0)``, plus the reference's term when
    ``reference_counts`` is given.
    """
    dist = np.asarray(dist, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if dist[0] <= 0 or reference[0] <= 0:
        raise ZeroDivisionError("P(0) must be positive")
    out = {}
    for k in (1, 2):
        if reference[k] == 0:
            out[k] = (None, None)
            continue
        ratio = (dist[k] / dist[0]) / (reference[k] / reference[0])
        err = None
        if counts is not None:
            rel2 = 0.0
            for c in (counts,) + ((reference_counts,) if reference_counts is not None else ()):
                if c[k] == 0 or c[0] == 0:
                    rel2 = math.inf
                else:
                    rel2 += 1.0 / c[k] + 1.0 / c[0]
            err = abs(ratio) * math.sqrt(rel2)
        out[k] = (float(ratio), err)
    return GainRatios(out[1][0], out[2][0], out[1][1], out[2][1])


def poisson_errors(counts: Sequence[int], total: int) -> tuple[np.ndarray, np.ndarray]:
    """Standard errors ``sqrt(c_i) / total`` of empirical probabilities.

    Returns:
        ``(sigma, zero_flags)``; ``zero_flags`` marks bins with no counts, whose
        error of 0 understates the uncertainty.
    """
    counts = np.asarray(counts, dtype=float)
    if (counts < 0).any():
        raise ValueError("counts must be non-negative")
    if total <= 0:
        raise ValueError("total must be positive")
    return np.sqrt(counts) / total, counts == 0


@dataclass(frozen=True)
class MeasurementRecord:
    shot_index: int
    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if len(self.counts) != RECORD_MODES:
            raise ValueError(f"a record holds {RECORD_MODES} counts, got {len(self.counts)}")
        if any(c < 0 for c in self.counts):
            raise ValueError("counts must be non-negative")


def _infer_format(path: Path, fmt: Optional[str]) -> str:
    if fmt is not None:
        if fmt not in ("jsonl", "csv"):
            raise ValueError(f"unknown record format {fmt!r}")
        return fmt
    return "csv" if path.suffix.lower() == ".csv" else "jsonl"


def iter_records(path, fmt: Optional[str] = None) -> Iterator[MeasurementRecord]:
    """Stream records from a JSON-lines or CSV file.

    JSON lines look like ``{"counts": [...20 ints...], "shot_index": 7}``
    (``shot_index`` optional). CSV rows hold 20 counts, optionally preceded by
    a ``shot_index`` column; a header row is allowed.
    """
    path = Path(path)
    fmt = _infer_format(path, fmt)
    with open(path, newline="", encoding="utf-8") as fh:
        if fmt == "jsonl":
            shot = 0
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    item = json.loads(line)
                    rec = MeasurementRecord(int(item.get("shot_index", shot)), item["counts"])
                except (ValueError, KeyError, TypeError, AttributeError) as exc:
                    raise RecordFormatError(f"{path}:{lineno}: {exc}") from None
                shot = rec.shot_index + 1
                yield rec
        else:
            reader = csv.reader(fh)
            shot = 0
            has_index = None
            for row in reader:
                lineno = reader.line_num
                if not row:
                    continue
                if has_index is None:
                    has_index = len(row) == RECORD_MODES + 1
                    if not row[0].strip().lstrip("-").isdigit():
                        continue
                try:
                    values = [int(v) for v in row]
                    if has_index:
                        rec = MeasurementRecord(values[0], values[1:])
                    else:
                        rec = MeasurementRecord(shot, values)
                except ValueError as exc:
                    raise RecordFormatError(f"{path}:{lineno}: {exc}") from None
                shot = rec.shot_index + 1
                yield rec


def load_records(path, fmt: Optional[str] = None) -> list[MeasurementRecord]:
    return list(iter_records(path, fmt))


def write_records(path, records: Iterable[MeasurementRecord], fmt: Optional[str] = None) -> None:
    path = Path(path)
    fmt = _infer_format(path, fmt)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if fmt == "jsonl":
            for rec in records:
                fh.write(json.dumps({"shot_index": rec.shot_index, "counts": list(rec.counts)}) + "\n")
        else:
            writer = csv.writer(fh)
            writer.writerow(["shot_index"] + [f"bin{k}" for k in range(RECORD_MODES)])
            for rec in records:
                writer.writerow([rec.shot_index, *rec.counts])


@dataclass
class HeraldTally:
    """Running counts of heralded shots; shards combine with :meth:`merge`.

    ``output_counts[l][n]`` counts accepted shots of pattern ``l`` with ``n``
    output photons; shots above the cutoff land in ``overflow``.
    """

    cutoff: int
    shots: int = 0
    output_counts: dict[int, np.ndarray] = field(default_factory=dict)
    overflow: dict[int, int] = field(default_factory=dict)

    def add(self, l: Optional[int], n: int) -> None:
        self.shots += 1
        if l is None:
            return
        if l not in self.output_counts:
            self.output_counts[l] = np.zeros(self.cutoff + 1, dtype=np.int64)
            self.overflow[l] = 0
        if n > self.cutoff:
            self.overflow[l] += 1
        else:
            self.output_counts[l][n] += 1

    def merge(self, other: "HeraldTally") -> "HeraldTally":
        if other.cutoff != self.cutoff:
            raise ValueError("cannot merge tallies with different cutoffs")
        out = HeraldTally(self.cutoff, self.shots + other.shots)
        for l in sorted(set(self.output_counts) | set(other.output_counts)):
            out.output_counts[l] = self.output_counts.get(l, 0) + other.output_counts.get(l, 0)
            out.overflow[l] = self.overflow.get(l, 0) + other.overflow.get(l, 0)
        return out

    def success_counts(self) -> dict[int, int]:
        return {l: int(c.sum()) + self.overflow[l] for l, c in sorted(self.output_counts.items())}

    def distribution(self) -> OutputDistribution:
        counts = np.zeros(self.cutoff + 1, dtype=np.int64)
        for c in self.output_counts.values():
            counts = counts + c
        total = int(counts.sum())
        success = self.success_counts()
        shots = max(self.shots, 1)
        if total == 0:
            return OutputDistribution(
                probabilities=np.zeros(self.cutoff + 1),
                success_probability=0.0,
                per_pattern_success={l: 0.0 for l in success},
                errors=np.zeros(self.cutoff + 1),
                counts=counts,
                empty=True,
            )
        sigma, _ = poisson_errors(counts, total)
        return OutputDistribution(
            probabilities=counts / total,
            success_probability=sum(success.values()) / shots,
            per_pattern_success={l: c / shots for l, c in success.items()},
            errors=sigma,
            counts=counts,
        )


def count_heralded(records: Iterable[MeasurementRecord], herald: HeraldSpec, output_mode: int = 1, cutoff: int = 8) -> HeraldTally:
    tally = HeraldTally(cutoff)
    for _, l in herald.patterns:
        tally.output_counts[l] = np.zeros(cutoff + 1, dtype=np.int64)
        tally.overflow[l] = 0
    for rec in records:
        tally.add(herald.match(rec.counts, output_mode), rec.counts[output_mode])
    return tally


def filter_heralded(
    records: Iterable[MeasurementRecord],
    herald: HeraldSpec,
    output_mode: int = 1,
    cutoff: int = 8,
) -> tuple[OutputDistribution, dict[int, int]]:
    """Empirical heralded distribution of ``output_mode`` and successes per pattern ``l``.

    Single pass over ``records``, so a streaming iterator is fine. The
    distribution covers output photon numbers up to ``cutoff``; the success
    counts include every accepted shot.
    """
    tally = count_heralded(records, herald, output_mode, cutoff)
    return tally.distribution(), tally.success_counts()


def synthesize_records(
    joint: dict[int, Sequence[float]],
    herald: HeraldSpec,
    shots: int,
    seed: int,
    output_mode: int = 1,
) -> list[MeasurementRecord]:
    """Draw shots from known heralded joint probabilities.

    ``joint[l][n]`` is the probability of pattern ``l`` with ``n`` output
    photons; the remaining probability produces all-zero (rejected) shots.
    """
    pats = dict((l, p) for p, l in herald.patterns)
    cats = [(l, n) for l in sorted(joint) for n in range(len(joint[l]))]
    probs = np.array([joint[l][n] for l, n in cats], dtype=float)
    rest = 1.0 - probs.sum()
    if rest < -1e-12:
        raise ValueError("joint probabilities exceed 1")
    probs = np.append(probs, max(rest, 0.0))
    rng = np.random.default_rng(seed)
    draws = rng.choice(len(probs), size=shots, p=probs / probs.sum())
    records = []
    for shot, k in enumerate(draws):
        counts = [0] * RECORD_MODES
        if k < len(cats):
            l, n = cats[k]
            counts[herald.fock_mode] = herald.fock_count
            for m, c in zip(herald.pattern_modes, pats[l]):
                counts[m] = c
            counts[output_mode] = n
        records.append(MeasurementRecord(shot, counts))
    return records


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_json(path, payload: dict) -> None:
    """Write ``payload`` as indented JSON, atomically."""
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Write a CSV with a header row, atomically. Floats use ``repr`` precision."""
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for v in row])
    _atomic_write(path, buf.getvalue())
