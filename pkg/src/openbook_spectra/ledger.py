"""Sorted multisets of eigenvalues with multiplicity and provenance."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable

import numpy as np


@dataclass(frozen=True)
class LedgerEntry:
    eigenvalue: float
    multiplicity: int
    provenance: Any = None  # ModeIndex or any object exposing a sort key
    flag: str = ""

    def sort_key(self):
        p = self.provenance
        key = (p.model_tag, p.k, p.m) if p is not None and hasattr(p, "k") else ("", 0, 0)
        return (self.eigenvalue, key)


@dataclass
class SpectrumLedger:
    """Eigenvalues sorted ascending (ties by mode label) inside ``window``."""

    entries: list = field(default_factory=list)
    window: tuple = (-np.inf, np.inf)
    r: float = float("nan")

    def __post_init__(self):
        lo, hi = self.window
        for e in self.entries:
            if e.multiplicity < 1:
                raise ValueError(f"multiplicity must be >= 1, got {e.multiplicity}")
            if not lo <= e.eigenvalue <= hi:
                raise ValueError(f"eigenvalue {e.eigenvalue} outside window {self.window}")
        self.entries = sorted(self.entries, key=LedgerEntry.sort_key)

    @classmethod
    def from_values(cls, values: Iterable[float], multiplicities=None, window=(-np.inf, np.inf),
                    r=float("nan")) -> "SpectrumLedger":
        values = list(values)
        mult = [1] * len(values) if multiplicities is None else list(multiplicities)
        return cls([LedgerEntry(float(v), int(m)) for v, m in zip(values, mult)], window, r)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([e.eigenvalue for e in self.entries], dtype=float)

    @property
    def multiplicities(self) -> np.ndarray:
        return np.array([e.multiplicity for e in self.entries], dtype=int)

    @property
    def total(self) -> int:
        return int(self.multiplicities.sum()) if self.entries else 0

    def expanded(self) -> np.ndarray:
        """Eigenvalues repeated by multiplicity, ascending."""
        if not self.entries:
            return np.zeros(0)
        return np.repeat(self.eigenvalues, self.multiplicities)

    def negated(self) -> "SpectrumLedger":
        lo, hi = self.window
        return SpectrumLedger([LedgerEntry(-e.eigenvalue, e.multiplicity, e.provenance, e.flag) for e in self.entries],
                              (-hi, -lo), self.r)

    def restricted(self, lo: float, hi: float, predicate=None) -> "SpectrumLedger":
        """Entries with lo < eigenvalue < hi (and predicate(entry) if given)."""
        keep = [e for e in self.entries if lo < e.eigenvalue < hi and (predicate is None or predicate(e))]
        return SpectrumLedger(keep, (lo, hi), self.r)

    def count_in(self, lo: float, hi: float) -> int:
        return sum(e.multiplicity for e in self.entries if lo < e.eigenvalue < hi)

    def merged(self, other: "SpectrumLedger") -> "SpectrumLedger":
        lo = max(self.window[0], other.window[0])
        hi = min(self.window[1], other.window[1])
        keep = [e for e in self.entries + other.entries if lo <= e.eigenvalue <= hi]
        return SpectrumLedger(keep, (lo, hi), self.r)


WINDOW_PRESETS = ("existence", "eta")


def window_radius(r: float, preset: str = "existence") -> float:
    """Half-width of the small-eigenvalue window.

    ``existence`` is sqrt(r/3), the window of the per-mode existence and
    uniqueness statements; ``eta`` is sqrt(r)/3, the truncation of the eta
    sums.  The two differ by a factor sqrt(3) and both are kept selectable.
    """
    if preset == "existence":
        return float(np.sqrt(r / 3.0))
    if preset == "eta":
        return float(np.sqrt(r) / 3.0)
    raise ValueError(f"unknown window preset {preset!r}; expected one of {WINDOW_PRESETS}")


def symmetric_window(r: float, preset: str = "existence") -> tuple:
    w = window_radius(r, preset)
    return (-w, w)
