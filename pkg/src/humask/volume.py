"""In-memory volume type shared by every stage of the pipeline."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class Unit(str, enum.Enum):
    RAW_HU = "RawHU"
    NORMALIZED = "Normalized"


@dataclass(frozen=True, eq=False)
class Volume3D:
    """Dense 3D scalar field indexed ``data[x, y, z]``.

    ``data`` is stored as float32 and made read-only on construction; use
    :meth:`with_data` to derive a modified volume.
    """

    data: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    affine: np.ndarray = field(default_factory=lambda: np.eye(4))
    unit: Unit = Unit.RAW_HU

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float32, copy=True)
        if data.ndim != 3 or min(data.shape) < 1:
            raise ValueError(f"volume must be 3D with positive extents, got {data.shape}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

        spacing = tuple(float(s) for s in self.spacing)
        if len(spacing) != 3 or not all(s > 0 for s in spacing):
            raise ValueError(f"spacing must be three positive values, got {self.spacing}")
        object.__setattr__(self, "spacing", spacing)

        affine = np.array(self.affine, dtype=np.float64, copy=True)
        if affine.shape != (4, 4):
            raise ValueError("affine must be 4x4")
        affine.setflags(write=False)
        object.__setattr__(self, "affine", affine)

        unit = Unit(self.unit)
        object.__setattr__(self, "unit", unit)
        if unit is Unit.NORMALIZED and data.size:
            if not (np.all(data >= 0.0) and np.all(data <= 1.0)):
                raise ValueError("normalized volume has voxels outside [0, 1]")

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(int(s) for s in self.data.shape)

    @property
    def size(self) -> int:
        return int(self.data.size)

    def with_data(self, data, unit: Unit | None = None) -> "Volume3D":
        return Volume3D(data, self.spacing, self.affine, self.unit if unit is None else unit)
