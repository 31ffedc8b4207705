"""Non-overlapping subvolume partition of a volume.

Flat block indices run with the last grid axis fastest:
``p = (i * n_w + j) * n_d + k`` for grid position ``(i, j, k)``. Mask plan
files refer to blocks by this index.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivisibilityError, ShapeError
from .volume import Unit, Volume3D


@dataclass(frozen=True)
class GridPlan:
    shape: tuple[int, int, int]
    sub: tuple[int, int, int]
    counts: tuple[int, int, int]

    @property
    def P(self) -> int:
        n_h, n_w, n_d = self.counts
        return n_h * n_w * n_d

    @property
    def block_size(self) -> int:
        h, w, d = self.sub
        return h * w * d

    def grid_index(self, p: int) -> tuple[int, int, int]:
        if not 0 <= p < self.P:
            raise IndexError(f"block index {p} outside [0, {self.P})")
        _, n_w, n_d = self.counts
        i, rem = divmod(p, n_w * n_d)
        j, k = divmod(rem, n_d)
        return i, j, k

    def flat_index(self, i: int, j: int, k: int) -> int:
        _, n_w, n_d = self.counts
        return (i * n_w + j) * n_d + k

    def origin(self, p: int) -> tuple[int, int, int]:
        i, j, k = self.grid_index(p)
        h, w, d = self.sub
        return i * h, j * w, k * d

    def slices(self, p: int) -> tuple[slice, slice, slice]:
        ox, oy, oz = self.origin(p)
        h, w, d = self.sub
        return slice(ox, ox + h), slice(oy, oy + w), slice(oz, oz + d)

    def to_dict(self) -> dict:
        return {"shape": list(self.shape), "sub": list(self.sub), "counts": list(self.counts), "P": self.P}

    @classmethod
    def from_dict(cls, doc: dict) -> "GridPlan":
        return plan_grid(tuple(doc["shape"]), tuple(doc["sub"]))


@dataclass(frozen=True, eq=False)
class Subvolume:
    data: np.ndarray
    origin: tuple[int, int, int]
    index: int


def _nearest_divisible(size: int, sub: int) -> tuple[int, int]:
    lower = (size // sub) * sub
    upper = lower + sub
    return (lower if lower > 0 else upper), upper


def plan_grid(shape, sub) -> GridPlan:
    """Grid of ``sub``-sized blocks tiling ``shape`` exactly."""
    shape = tuple(int(s) for s in shape)
    sub = tuple(int(s) for s in sub)
    if len(shape) != 3 or len(sub) != 3:
        raise ShapeError("shape and subvolume shape must both have three entries")
    if min(shape) < 1 or min(sub) < 1:
        raise ShapeError(f"dimensions must be positive, got {shape} / {sub}")
    for axis, (size, s) in enumerate(zip(shape, sub), start=1):
        if size % s:
            raise DivisibilityError(axis, size, s, _nearest_divisible(size, s))
    counts = tuple(size // s for size, s in zip(shape, sub))
    return GridPlan(shape, sub, counts)


def _check_matches(v: Volume3D, g: GridPlan) -> None:
    if v.shape != g.shape:
        raise ShapeError(f"grid plan is for shape {g.shape}, volume has {v.shape}")


def extract(v: Volume3D, g: GridPlan, p: int) -> Subvolume:
    _check_matches(v, g)
    if not 0 <= p < g.P:
        raise IndexError(f"block index {p} outside [0, {g.P})")
    block = np.array(v.data[g.slices(p)], copy=True)
    return Subvolume(block, g.origin(p), p)


def extract_all(v: Volume3D, g: GridPlan) -> np.ndarray:
    """All blocks as a ``(P, h, w, d)`` array in flat-index order."""
    _check_matches(v, g)
    (n_h, n_w, n_d), (h, w, d) = g.counts, g.sub
    blocks = v.data.reshape(n_h, h, n_w, w, n_d, d).transpose(0, 2, 4, 1, 3, 5)
    return np.ascontiguousarray(blocks.reshape(g.P, h, w, d))


def blocks_to_array(g: GridPlan, blocks: np.ndarray) -> np.ndarray:
    """Inverse of :func:`extract_all` on raw arrays."""
    (n_h, n_w, n_d), (h, w, d) = g.counts, g.sub
    arr = np.asarray(blocks).reshape(n_h, n_w, n_d, h, w, d).transpose(0, 3, 1, 4, 2, 5)
    return arr.reshape(g.shape)


def reassemble(g: GridPlan, blocks, like: Volume3D | None = None) -> Volume3D:
    """Stitch ``P`` positional blocks back into a volume.

    Block ``p`` must carry origin ``g.origin(p)``; metadata is copied from
    ``like`` when given.
    """
    blocks = list(blocks)
    if len(blocks) != g.P:
        raise ShapeError(f"expected {g.P} blocks, got {len(blocks)}")
    out = np.empty(g.shape, dtype=np.float32)
    for p, block in enumerate(blocks):
        data = block.data if isinstance(block, Subvolume) else np.asarray(block)
        if data.shape != g.sub:
            raise ShapeError(f"block {p} has shape {data.shape}, expected {g.sub}")
        if isinstance(block, Subvolume) and tuple(block.origin) != g.origin(p):
            raise ShapeError(f"block at position {p} has origin {block.origin}, expected {g.origin(p)}")
        out[g.slices(p)] = data
    if like is None:
        return Volume3D(out)
    return like.with_data(out)


def pad_to_divisible(v: Volume3D, sub, fill: float = 0.0) -> Volume3D:
    """Pad the high end of each axis with ``fill`` up to a multiple of ``sub``."""
    sub = tuple(int(s) for s in sub)
    pads = [(0, (-size) % s) for size, s in zip(v.shape, sub)]
    if not any(hi for _, hi in pads):
        return v
    if v.unit is Unit.NORMALIZED and not 0.0 <= fill <= 1.0:
        raise ValueError("fill for a normalized volume must lie in [0, 1]")
    data = np.pad(v.data, pads, mode="constant", constant_values=fill)
    return v.with_data(data)
