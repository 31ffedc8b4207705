"""HU windowing and intensity histograms."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import EmptyInput, UnitError
from .volume import Unit, Volume3D


@dataclass(frozen=True)
class WindowSpec:
    hu_min: float = -175.0
    hu_max: float = 250.0

    def __post_init__(self):
        if not self.hu_min < self.hu_max:
            raise ValueError(f"window requires hu_min < hu_max, got ({self.hu_min}, {self.hu_max})")

    def as_list(self) -> list[float]:
        return [float(self.hu_min), float(self.hu_max)]


DEFAULT_WINDOW = WindowSpec()


def normalize(v: Volume3D, w: WindowSpec = DEFAULT_WINDOW) -> Volume3D:
    """Map raw HU to [0, 1] through the window, clamping outside it."""
    if v.unit is not Unit.RAW_HU:
        raise UnitError("volume is already normalized")
    span = float(w.hu_max) - float(w.hu_min)
    out = (v.data.astype(np.float64) - float(w.hu_min)) / span
    np.clip(out, 0.0, 1.0, out=out)
    return v.with_data(out.astype(np.float32), unit=Unit.NORMALIZED)


def denormalize(v: Volume3D, w: WindowSpec = DEFAULT_WINDOW) -> Volume3D:
    """Inverse of :func:`normalize` on the unclamped range."""
    if v.unit is not Unit.NORMALIZED:
        raise UnitError("volume is not normalized")
    out = float(w.hu_min) + v.data.astype(np.float64) * (float(w.hu_max) - float(w.hu_min))
    return v.with_data(out.astype(np.float32), unit=Unit.RAW_HU)


@dataclass(frozen=True)
class Histogram:
    bin_count: int
    range: tuple[float, float]
    counts: np.ndarray
    total: int

    @property
    def edges(self) -> np.ndarray:
        return bin_edges(self.bin_count, self.range)

    @property
    def centers(self) -> np.ndarray:
        e = self.edges
        return (e[:-1] + e[1:]) / 2.0

    @property
    def probabilities(self) -> np.ndarray:
        return self.counts / float(self.total)

    def __add__(self, other: "Histogram") -> "Histogram":
        if self.bin_count != other.bin_count or self.range != other.range:
            raise ValueError("cannot add histograms with different binning")
        return Histogram(self.bin_count, self.range, self.counts + other.counts, self.total + other.total)

    def to_csv(self, path) -> None:
        e = self.edges
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["bin_lo", "bin_hi", "count"])
            for lo, hi, c in zip(e[:-1], e[1:], self.counts):
                writer.writerow([repr(float(lo)), repr(float(hi)), int(c)])


def bin_edges(bin_count: int, value_range=(0.0, 1.0)) -> np.ndarray:
    lo, hi = (float(r) for r in value_range)
    return np.linspace(lo, hi, int(bin_count) + 1)


def histogram(values, bin_count: int = 256, value_range=(0.0, 1.0)) -> Histogram:
    """Count values into ``bin_count`` equal-width bins over ``value_range``.

    Out-of-range values are clamped into the end bins; a value on an
    interior edge belongs to the upper bin and ``hi`` belongs to the last.
    """
    lo, hi = (float(r) for r in value_range)
    if bin_count < 2:
        raise ValueError("bin_count must be at least 2")
    if not lo < hi:
        raise ValueError("histogram range requires lo < hi")
    vals = np.ravel(np.asarray(values, dtype=np.float64))
    if vals.size == 0:
        raise EmptyInput("histogram of an empty sequence")
    if np.isnan(vals).any():
        raise ValueError("histogram input contains NaN")
    idx = kernels.bin_indices(vals, bin_edges(bin_count, (lo, hi)))
    counts = np.bincount(idx, minlength=bin_count).astype(np.int64)
    return Histogram(int(bin_count), (lo, hi), counts, int(vals.size))
