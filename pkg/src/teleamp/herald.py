"""Herald patterns shared by the simulation and data-analysis paths."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .circuit import BOREALIS_FOURIER_MODES, BOREALIS_HERALD_MODE, BOREALIS_OUTPUT_MODE, ideal_fourier_modes

__all__ = ["HeraldSpec"]


@dataclass(frozen=True)
class HeraldSpec:
    """Accepted detector patterns of the teleamplifier.

    A shot is accepted when ``fock_mode`` shows ``fock_count`` photons and the
    counts on ``pattern_modes`` equal one of ``patterns``; each accepted pattern
    carries its index ``l``. With ``require_others_vacuum`` every remaining mode
    except the output must read zero.
    """

    fock_mode: int = BOREALIS_HERALD_MODE
    fock_count: int = 2
    pattern_modes: tuple[int, ...] = BOREALIS_FOURIER_MODES
    patterns: tuple[tuple[tuple[int, ...], int], ...] = (((0, 1, 1), 0), ((1, 0, 1), 1), ((1, 1, 0), 2))
    require_others_vacuum: bool = True

    def __post_init__(self):
        object.__setattr__(self, "pattern_modes", tuple(int(m) for m in self.pattern_modes))
        object.__setattr__(
            self, "patterns", tuple((tuple(int(c) for c in p), int(l)) for p, l in self.patterns)
        )
        pats = [p for p, _ in self.patterns]
        ls = [l for _, l in self.patterns]
        if len(set(pats)) != len(pats):
            raise ValueError("herald patterns must be distinct")
        if len(set(ls)) != len(ls):
            raise ValueError("herald l values must be distinct")
        if any(len(p) != len(self.pattern_modes) for p in pats):
            raise ValueError("pattern length must match pattern_modes")
        if self.fock_mode in self.pattern_modes or len(set(self.pattern_modes)) != len(self.pattern_modes):
            raise ValueError("herald modes must be distinct")

    @classmethod
    def borealis(cls, require_others_vacuum: bool = True) -> "HeraldSpec":
        return cls(require_others_vacuum=require_others_vacuum)

    @classmethod
    def ideal(cls, n: int) -> "HeraldSpec":
        """Herald of :func:`teleamp.circuit.build_ideal_teleamp` with cutoff ``n``.

        ``l`` is the position of the vacuum output among the Fourier ports.
        """
        patterns = []
        for l in range(n + 1):
            patterns.append((tuple(0 if k == l else 1 for k in range(n + 1)), l))
        return cls(0, n, ideal_fourier_modes(n), tuple(patterns))

    @property
    def modes(self) -> tuple[int, ...]:
        return (self.fock_mode,) + self.pattern_modes

    def subset(self, ls: Sequence[int]) -> "HeraldSpec":
        """Same herald restricted to the patterns with the given ``l`` values."""
        keep = tuple((p, l) for p, l in self.patterns if l in set(ls))
        return HeraldSpec(self.fock_mode, self.fock_count, self.pattern_modes, keep, self.require_others_vacuum)

    def match(self, counts: Sequence[int], output_mode: int) -> Optional[int]:
        """``l`` of the accepted pattern shown by ``counts``, else ``None``."""
        if counts[self.fock_mode] != self.fock_count:
            return None
        shown = tuple(counts[m] for m in self.pattern_modes)
        for p, l in self.patterns:
            if p == shown:
                break
        else:
            return None
        if self.require_others_vacuum:
            skip = set(self.modes) | {output_mode}
            if any(c != 0 for m, c in enumerate(counts) if m not in skip):
                return None
        return l
