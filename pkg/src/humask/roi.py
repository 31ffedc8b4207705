"""Information content of foreground vs background regions, and threshold calibration.

Entropy and complexity are plug-in estimates over a fixed-range histogram.
Complexity is the LMC statistical complexity: normalized entropy times
disequilibrium (squared distance of the bin probabilities from uniform).
Mutual information is measured between each voxel and its neighbour at a
fixed offset, both inside the region.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import EmptyInput, InsufficientPairs, NoSeparation, ShapeError
from .intensity import Histogram, bin_edges, histogram
from .partition import GridPlan, extract_all
from .volume import Volume3D

ENTROPY_BINS = 256
MI_BINS = 64
CALIBRATION_BINS = 20
MI_OFFSET = (1, 0, 0)

# Region statistics published for Flare22 (bits / dimensionless); used only
# for side-by-side display when real scans are analyzed.
FLARE22_REFERENCE = {
    "Foreground": {"entropy_bits": 2.73, "complexity": 0.35, "mi_bits": 5.64},
    "Background": {"entropy_bits": 0.02, "complexity": 0.07, "mi_bits": 0.09},
}


class Region(str, enum.Enum):
    FOREGROUND = "Foreground"
    BACKGROUND = "Background"


def region_masks(v: Volume3D, labels=None, lam: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Boolean foreground/background masks from labels (> 0) or a threshold."""
    if labels is not None:
        labels = np.asarray(labels)
        if labels.shape != v.shape:
            raise ShapeError(f"labels shape {labels.shape} does not match volume {v.shape}")
        fg = labels > 0
    elif lam is not None:
        fg = v.data >= lam
    else:
        raise ValueError("region split needs labels or a threshold")
    return fg, ~fg


def region_split(v: Volume3D, labels=None, lam: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    fg, bg = region_masks(v, labels, lam)
    return v.data[fg], v.data[bg]


def _entropy_bits(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def _probabilities(values, bin_count, value_range) -> np.ndarray:
    h = histogram(values, bin_count, value_range)
    return h.counts / float(h.total)


def shannon_entropy(values, bin_count: int = ENTROPY_BINS, value_range=(0.0, 1.0)) -> float:
    if np.size(values) == 0:
        raise EmptyInput("entropy of an empty region")
    # abs() folds the -0.0 produced by a single occupied bin
    return abs(_entropy_bits(_probabilities(values, bin_count, value_range)))


def complexity(values, bin_count: int = ENTROPY_BINS, value_range=(0.0, 1.0)) -> float:
    if np.size(values) == 0:
        raise EmptyInput("complexity of an empty region")
    p = _probabilities(values, bin_count, value_range)
    h_norm = abs(_entropy_bits(p)) / math.log2(bin_count)
    disequilibrium = float(((p - 1.0 / bin_count) ** 2).sum())
    return h_norm * disequilibrium


def mi_from_joint(joint: np.ndarray) -> float:
    """H(A) + H(B) - H(A, B) of a joint count table, clipped at 0."""
    total = joint.sum()
    p = joint / float(total)
    mi = _entropy_bits(p.sum(axis=1)) + _entropy_bits(p.sum(axis=0)) - _entropy_bits(p.ravel())
    return max(0.0, mi)


def pair_mutual_information(a, b, bin_count: int = MI_BINS, value_range=(0.0, 1.0)) -> float:
    """Plug-in MI between two paired samples."""
    a = np.ravel(a)
    b = np.ravel(b)
    if a.shape != b.shape:
        raise ShapeError("paired samples differ in length")
    if a.size < 2:
        raise InsufficientPairs(f"{a.size} pairs; need at least 2")
    edges = bin_edges(bin_count, value_range)
    ia = kernels.bin_indices(a, edges)
    ib = kernels.bin_indices(b, edges)
    joint = np.bincount(ia * bin_count + ib, minlength=bin_count * bin_count).reshape(bin_count, bin_count)
    return mi_from_joint(joint)


def neighbor_joint_histogram(field, region=None, offset=MI_OFFSET, bin_count: int = MI_BINS,
                             value_range=(0.0, 1.0)) -> np.ndarray:
    field = np.asarray(field)
    if field.ndim != 3:
        raise ShapeError("neighbour pairs need a 3D field")
    if region is None:
        region = np.ones(field.shape, dtype=bool)
    elif np.shape(region) != field.shape:
        raise ShapeError("region mask does not match field shape")
    idx = kernels.bin_indices(field, bin_edges(bin_count, value_range)).reshape(field.shape)
    return kernels.neighbor_joint_counts(idx, region, offset, bin_count)


def mutual_information(field, region=None, offset=MI_OFFSET, bin_count: int = MI_BINS,
                       value_range=(0.0, 1.0)) -> float:
    """MI between intensity at ``x`` and at ``x + offset`` over in-region pairs."""
    joint = neighbor_joint_histogram(field, region, offset, bin_count, value_range)
    pairs = int(joint.sum())
    if pairs < 2:
        raise InsufficientPairs(f"region yields {pairs} neighbour pairs at offset {tuple(offset)}")
    return mi_from_joint(joint)


@dataclass(frozen=True)
class RegionReport:
    region: Region
    voxel_count: int
    entropy: float
    complexity: float
    mutual_information: float

    @property
    def defined(self) -> bool:
        return not math.isnan(self.entropy)


def region_report(v: Volume3D, mask: np.ndarray, region: Region) -> RegionReport:
    values = v.data[mask]
    if values.size == 0:
        return RegionReport(region, 0, math.nan, math.nan, math.nan)
    try:
        mi = mutual_information(v.data, mask)
    except InsufficientPairs:
        mi = math.nan
    return RegionReport(region, int(values.size), shannon_entropy(values), complexity(values), mi)


def analyze_regions(v: Volume3D, labels=None, lam: float | None = None) -> tuple[RegionReport, RegionReport]:
    fg, bg = region_masks(v, labels, lam)
    return region_report(v, fg, Region.FOREGROUND), region_report(v, bg, Region.BACKGROUND)


def block_entropies(v: Volume3D, g: GridPlan, bin_count: int = ENTROPY_BINS) -> np.ndarray:
    """Shannon entropy of each subvolume, in flat-index order."""
    blocks = extract_all(v, g)
    return np.array([shannon_entropy(b, bin_count) for b in blocks])


@dataclass(frozen=True)
class ThresholdEstimate:
    lambda_hat: float
    method: str
    eps_bg: float
    eps_fg: float
    fg_hist: Histogram
    bg_hist: Histogram

    def to_dict(self) -> dict:
        return {"lambda_hat": self.lambda_hat, "method": self.method,
                "eps_bg": self.eps_bg, "eps_fg": self.eps_fg,
                "bin_count": self.fg_hist.bin_count, "range": list(self.fg_hist.range)}


def calibrate_threshold(fg_hist: Histogram, bg_hist: Histogram,
                        eps_bg: float = 0.05, eps_fg: float = 0.10) -> ThresholdEstimate:
    """Lowest bin centre separating the two intensity distributions.

    At a candidate centre ``t`` the mass "above t" is the mass of t's own
    bin and every bin above it. ``t`` qualifies when less than ``eps_bg`` of
    the background and more than ``1 - eps_fg`` of the foreground lie above.
    """
    if fg_hist.bin_count != bg_hist.bin_count or fg_hist.range != bg_hist.range:
        raise ValueError("foreground and background histograms must share binning")
    if fg_hist.total == 0 or bg_hist.total == 0:
        raise NoSeparation("empty histogram")
    bg_above = np.cumsum(bg_hist.counts[::-1])[::-1] / float(bg_hist.total)
    fg_above = np.cumsum(fg_hist.counts[::-1])[::-1] / float(fg_hist.total)
    ok = (bg_above < eps_bg) & (fg_above > 1.0 - eps_fg)
    hits = np.flatnonzero(ok)
    if hits.size == 0:
        raise NoSeparation("no intensity level separates foreground from background")
    t = float(fg_hist.centers[hits[0]])
    return ThresholdEstimate(t, "ValleySeek", eps_bg, eps_fg, fg_hist, bg_hist)


def region_histograms(v: Volume3D, labels, bin_count: int = CALIBRATION_BINS) -> tuple[Histogram, Histogram]:
    fg, bg = region_masks(v, labels)
    empty = np.zeros(bin_count, dtype=np.int64)

    def hist(mask):
        if not mask.any():
            return Histogram(bin_count, (0.0, 1.0), empty.copy(), 0)
        return histogram(v.data[mask], bin_count, (0.0, 1.0))

    return hist(fg), hist(bg)
