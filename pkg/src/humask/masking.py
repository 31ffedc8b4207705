"""Foreground characterization, mask plans and masked-volume assembly."""
from __future__ import annotations

import enum
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels, rng
from .errors import DegenerateRatioError, NoForegroundError, ShapeError, UnitError
from .partition import GridPlan, Subvolume, plan_grid
from .volume import Unit, Volume3D

DEFAULT_LAMBDA = 0.1
DEFAULT_RATIO = 0.6
DEFAULT_SUB = (16, 16, 16)
CHAR_TOLERANCE = 1e-6


class Strategy(str, enum.Enum):
    FOREGROUND_HU = "ForegroundHU"
    RANDOM = "Random"
    LOCAL_BLOCK = "LocalBlock"

    @classmethod
    def parse(cls, name) -> "Strategy":
        if isinstance(name, cls):
            return name
        aliases = {"foreground": cls.FOREGROUND_HU, "foregroundhu": cls.FOREGROUND_HU, "ours": cls.FOREGROUND_HU,
                   "random": cls.RANDOM, "local": cls.LOCAL_BLOCK, "localblock": cls.LOCAL_BLOCK}
        try:
            return aliases[str(name).lower()]
        except KeyError:
            raise ValueError(f"unknown masking strategy {name!r}") from None


@dataclass(frozen=True)
class MaskEntry:
    p: int
    char: float
    fg: bool
    masked: bool


@dataclass(frozen=True)
class MaskPlan:
    grid: GridPlan
    lam: float
    ratio: float
    strategy: Strategy
    seed: int
    entries: tuple[MaskEntry, ...]
    window: tuple[float, float] | None = None
    rng_algorithm: str = rng.ALGORITHM

    @property
    def eligible(self) -> list[int]:
        if self.strategy is Strategy.FOREGROUND_HU:
            return [e.p for e in self.entries if e.fg]
        return [e.p for e in self.entries]

    @property
    def foreground(self) -> list[int]:
        return [e.p for e in self.entries if e.fg]

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.to_dict(),
            "lambda": self.lam,
            "ratio": self.ratio,
            "strategy": self.strategy.value,
            "seed": self.seed,
            "rng_algorithm": self.rng_algorithm,
            "window": None if self.window is None else [float(w) for w in self.window],
            "entries": [{"p": e.p, "char": e.char, "fg": e.fg, "masked": e.masked} for e in self.entries],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "MaskPlan":
        window = doc.get("window")
        return cls(
            grid=GridPlan.from_dict(doc["grid"]),
            lam=float(doc["lambda"]),
            ratio=float(doc["ratio"]),
            strategy=Strategy.parse(doc["strategy"]),
            seed=int(doc["seed"]),
            entries=tuple(
                MaskEntry(int(e["p"]), float(e["char"]), bool(e["fg"]), bool(e["masked"])) for e in doc["entries"]
            ),
            window=None if window is None else (float(window[0]), float(window[1])),
            rng_algorithm=doc.get("rng_algorithm", rng.ALGORITHM),
        )

    @classmethod
    def from_json(cls, text: str) -> "MaskPlan":
        return cls.from_dict(json.loads(text))


def characterize(sub) -> float:
    """Mean intensity of one subvolume."""
    data = sub.data if isinstance(sub, Subvolume) else np.asarray(sub)
    if data.size == 0:
        raise ValueError("empty subvolume")
    data = np.asarray(data, dtype=np.float32).reshape(data.shape if data.ndim == 3 else (data.size, 1, 1))
    return float(kernels.block_means(data, data.shape)[0, 0, 0])


def characterize_all(v: Volume3D, g: GridPlan) -> np.ndarray:
    """Mean intensity of every block, in flat-index order."""
    if v.shape != g.shape:
        raise ShapeError(f"grid plan is for shape {g.shape}, volume has {v.shape}")
    return kernels.block_means(v.data, g.sub).ravel()


def classify_foreground(char_value: float, lam: float = DEFAULT_LAMBDA) -> bool:
    return bool(char_value >= lam)


def masked_count(ratio: float, eligible: int) -> int:
    """``round(ratio * eligible)`` with halves rounded up."""
    return int(math.floor(ratio * eligible + 0.5))


def _local_box(counts, k):
    """Most cube-like box within the grid holding at least ``k`` cells."""
    best = None
    for a, b, c in itertools.product(*(range(1, n + 1) for n in counts)):
        vol = a * b * c
        if vol < k:
            continue
        key = (vol, max(a, b, c) - min(a, b, c), (a, b, c))
        if best is None or key < best:
            best = key
    return best[2]


def _local_block_selection(g: GridPlan, k: int, gen: rng.SplitMix64) -> list[int]:
    a, b, c = _local_box(g.counts, k)
    n_h, n_w, n_d = g.counts
    spots = (n_h - a + 1, n_w - b + 1, n_d - c + 1)
    corner = gen.below(spots[0] * spots[1] * spots[2])
    ci, rem = divmod(corner, spots[1] * spots[2])
    cj, ck = divmod(rem, spots[2])
    cells = [g.flat_index(ci + i, cj + j, ck + kk) for i in range(a) for j in range(b) for kk in range(c)]
    return cells[:k]


def build_mask_plan(
    v: Volume3D,
    sub=DEFAULT_SUB,
    lam: float = DEFAULT_LAMBDA,
    ratio: float = DEFAULT_RATIO,
    strategy=Strategy.FOREGROUND_HU,
    seed: int = 0,
    window=None,
) -> MaskPlan:
    """Characterize every subvolume and choose which ones to hide.

    ``ratio`` is the hidden fraction of the eligible subvolumes: the
    foreground ones for ``ForegroundHU``, all of them otherwise.
    ``LocalBlock`` hides one contiguous box of grid cells at a seeded corner.
    """
    if v.unit is not Unit.NORMALIZED:
        raise UnitError("mask plans are built on normalized volumes")
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"ratio must lie in (0, 1], got {ratio}")
    strategy = Strategy.parse(strategy)
    g = plan_grid(v.shape, sub)
    chars = characterize_all(v, g)
    fg = chars >= lam

    if strategy is Strategy.FOREGROUND_HU:
        eligible = [int(p) for p in np.flatnonzero(fg)]
        if not eligible:
            raise NoForegroundError(
                f"no subvolume has mean intensity >= {lam}; the scan is empty or mis-windowed"
            )
    else:
        eligible = list(range(g.P))
    k = masked_count(ratio, len(eligible))
    if k == 0:
        raise DegenerateRatioError(f"ratio {ratio} of {len(eligible)} eligible subvolumes masks nothing")

    gen = rng.SplitMix64(seed)
    if strategy is Strategy.LOCAL_BLOCK:
        chosen = _local_block_selection(g, k, gen)
    else:
        chosen = gen.sample(eligible, k)
    chosen = set(chosen)

    entries = tuple(
        MaskEntry(p, float(chars[p]), bool(fg[p]), p in chosen) for p in range(g.P)
    )
    return MaskPlan(g, float(lam), float(ratio), strategy, int(seed), entries,
                    None if window is None else tuple(float(x) for x in window))


def masked_indices(plan: MaskPlan) -> list[int]:
    return sorted(e.p for e in plan.entries if e.masked)


def block_selector(plan: MaskPlan, target: str = "masked") -> np.ndarray:
    """Boolean per block: the hidden blocks, or the background ones."""
    if target == "masked":
        return np.array([e.masked for e in plan.entries], dtype=bool)
    if target == "background":
        return np.array([not e.fg for e in plan.entries], dtype=bool)
    raise ValueError(f"unknown mask target {target!r}")


def voxel_mask(plan: MaskPlan, target: str = "masked") -> np.ndarray:
    """Expand the per-block selection to a voxel-level boolean volume."""
    g = plan.grid
    sel = block_selector(plan, target).reshape(g.counts)
    h, w, d = g.sub
    return np.repeat(np.repeat(np.repeat(sel, h, axis=0), w, axis=1), d, axis=2)


def apply_mask(v: Volume3D, plan: MaskPlan, fill: float = 0.0, target: str = "masked") -> Volume3D:
    """Replace the selected blocks with ``fill``; other voxels are untouched.

    ``target="masked"`` hides the plan's masked blocks. ``target="background"``
    instead blanks every non-foreground block and keeps the foreground,
    which is the literal product-with-indicator reading of the assembly
    step.
    """
    if v.shape != plan.grid.shape:
        raise ShapeError(f"plan grid is for shape {plan.grid.shape}, volume has {v.shape}")
    if v.unit is Unit.NORMALIZED and not 0.0 <= fill <= 1.0:
        raise ValueError("fill for a normalized volume must lie in [0, 1]")
    sel = voxel_mask(plan, target)
    if not sel.any():
        return v.with_data(v.data)
    out = np.array(v.data, copy=True)
    out[sel] = np.float32(fill)
    return v.with_data(out)


def verify_plan(plan: MaskPlan, v: Volume3D, tol: float = CHAR_TOLERANCE) -> list[str]:
    """Re-check a plan against its source volume; returns violation messages."""
    problems = []
    g = plan.grid
    if v.shape != g.shape:
        return [f"grid shape {g.shape} does not match volume shape {v.shape}"]
    if len(plan.entries) != g.P:
        return [f"plan has {len(plan.entries)} entries, grid has P={g.P}"]
    chars = characterize_all(v, g)
    for idx, e in enumerate(plan.entries):
        if e.p != idx:
            problems.append(f"entry {idx}: index field is {e.p}")
            continue
        if abs(e.char - chars[idx]) > tol:
            problems.append(f"entry {e.p}: char {e.char!r} drifts from recomputed {chars[idx]!r}")
        if e.fg != classify_foreground(e.char, plan.lam):
            problems.append(f"entry {e.p}: fg={e.fg} but char {e.char!r} vs lambda {plan.lam}")
        if plan.strategy is Strategy.FOREGROUND_HU and e.masked and not e.fg:
            problems.append(f"entry {e.p}: masked but not foreground")
    n_masked = sum(e.masked for e in plan.entries)
    expected = masked_count(plan.ratio, len(plan.eligible))
    if n_masked != expected:
        problems.append(f"{n_masked} entries masked, expected round({plan.ratio} * {len(plan.eligible)}) = {expected}")
    if not problems:
        try:
            rebuilt = build_mask_plan(v, g.sub, plan.lam, plan.ratio, plan.strategy, plan.seed, plan.window)
        except Exception as exc:  # noqa: BLE001 - report, don't crash the verifier
            problems.append(f"plan cannot be rebuilt from its seed: {exc}")
        else:
            if masked_indices(rebuilt) != masked_indices(plan):
                problems.append("masked set differs from the one reproduced from the seed")
    return problems
