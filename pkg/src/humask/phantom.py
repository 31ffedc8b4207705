"""Synthetic CT phantoms with known organ geometry.

Phantoms are generated directly on the normalized intensity scale. The
background level may sit below zero, which models air lying beneath the
intensity window floor: after clamping it is mostly exactly 0.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import SpecError
from .volume import Unit, Volume3D


@dataclass(frozen=True)
class Ellipsoid:
    center: tuple[float, float, float]
    radii: tuple[float, float, float]
    mean: float = 0.0
    sigma: float = 0.0

    def mask(self, shape) -> np.ndarray:
        x, y, z = np.ogrid[: shape[0], : shape[1], : shape[2]]
        (cx, cy, cz), (rx, ry, rz) = self.center, self.radii
        return ((x - cx) / rx) ** 2 + ((y - cy) / ry) ** 2 + ((z - cz) / rz) ** 2 <= 1.0


@dataclass(frozen=True)
class PhantomSpec:
    shape: tuple[int, int, int]
    background_level: float = 0.0
    background_sigma: float = 0.0
    organs: tuple[Ellipsoid, ...] = ()
    air_pockets: tuple[Ellipsoid, ...] = ()
    seed: int = 0
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def validate(self) -> None:
        if len(self.shape) != 3 or min(self.shape) < 1:
            raise SpecError(f"shape must be three positive ints, got {self.shape}")
        if not self.background_level < 0.1:
            raise SpecError(f"background level {self.background_level} must be < 0.1")
        if self.background_sigma < 0:
            raise SpecError("background sigma must be non-negative")
        for kind, items in (("organ", self.organs), ("air pocket", self.air_pockets)):
            for idx, e in enumerate(items):
                if min(e.radii) <= 0:
                    raise SpecError(f"{kind} {idx}: radii must be positive")
                for axis in range(3):
                    lo = e.center[axis] - e.radii[axis]
                    hi = e.center[axis] + e.radii[axis]
                    if lo < 0 or hi > self.shape[axis] - 1:
                        raise SpecError(
                            f"{kind} {idx} extends outside the volume on axis {axis + 1} "
                            f"([{lo:g}, {hi:g}] vs [0, {self.shape[axis] - 1}])"
                        )
        for idx, organ in enumerate(self.organs):
            if not 0.1 <= organ.mean <= 1.0:
                raise SpecError(f"organ {idx}: mean intensity {organ.mean} outside [0.1, 1]")
            if organ.sigma < 0:
                raise SpecError(f"organ {idx}: sigma must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "PhantomSpec":
        try:
            organs = tuple(
                Ellipsoid(tuple(o["center"]), tuple(o["radii"]), float(o["mean"]), float(o.get("sigma", 0.0)))
                for o in doc.get("organs", [])
            )
            pockets = tuple(
                Ellipsoid(tuple(a["center"]), tuple(a["radii"])) for a in doc.get("air_pockets", [])
            )
            return cls(
                shape=tuple(int(s) for s in doc["shape"]),
                background_level=float(doc.get("background_level", 0.0)),
                background_sigma=float(doc.get("background_sigma", 0.0)),
                organs=organs,
                air_pockets=pockets,
                seed=int(doc.get("seed", 0)),
                spacing=tuple(float(s) for s in doc.get("spacing", (1.0, 1.0, 1.0))),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecError(f"malformed phantom spec: {exc}") from exc


def load_spec(path) -> PhantomSpec:
    """Parse a JSON phantom spec; JSON syntax errors surface as SpecError."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise SpecError(f"{path}: top-level JSON value must be an object")
    return PhantomSpec.from_dict(doc)


def generate_phantom(spec: PhantomSpec) -> tuple[Volume3D, np.ndarray]:
    """Render ``spec`` into a normalized volume and an int32 label volume.

    Organs are painted in order (later wins), then air pockets are carved
    to 0 intensity with label 0.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    shape = tuple(spec.shape)
    labels = np.zeros(shape, dtype=np.int32)
    if spec.background_sigma > 0:
        data = rng.normal(spec.background_level, spec.background_sigma, size=shape)
    else:
        data = np.full(shape, spec.background_level, dtype=np.float64)

    for k, organ in enumerate(spec.organs, start=1):
        inside = organ.mask(shape)
        n = int(inside.sum())
        if organ.sigma > 0:
            data[inside] = rng.normal(organ.mean, organ.sigma, size=n)
        else:
            data[inside] = organ.mean
        labels[inside] = k

    for pocket in spec.air_pockets:
        inside = pocket.mask(shape)
        data[inside] = 0.0
        labels[inside] = 0

    np.clip(data, 0.0, 1.0, out=data)
    vol = Volume3D(data.astype(np.float32), spacing=spec.spacing,
                   affine=np.diag([*spec.spacing, 1.0]), unit=Unit.NORMALIZED)
    return vol, labels


def standard_phantom_spec(seed: int = 0, shape=(32, 32, 32)) -> PhantomSpec:
    """Abdomen-like phantom: a soft-tissue body filling the field of view,
    holding three organs and a gas pocket. Used as the default training target.
    """
    sx, sy, sz = shape
    s = min(shape) / 32.0
    organs = (
        Ellipsoid(((sx - 1) / 2, (sy - 1) / 2, (sz - 1) / 2), ((sx - 1) / 2, (sy - 1) / 2, (sz - 1) / 2), 0.50, 0.03),  # body
        Ellipsoid((sx * 0.40, sy * 0.40, sz * 0.45), (6 * s, 5 * s, 6 * s), 0.62, 0.03),  # liver
        Ellipsoid((sx * 0.65, sy * 0.60, sz * 0.55), (3 * s, 3 * s, 4 * s), 0.72, 0.03),  # kidney
        Ellipsoid((sx * 0.50, sy * 0.75, sz * 0.50), (2 * s, 2 * s, 8 * s), 0.92, 0.02),  # spine
    )
    pockets = (Ellipsoid((sx * 0.60, sy * 0.35, sz * 0.50), (2 * s, 2 * s, 2 * s)),)
    return PhantomSpec(shape=tuple(shape), background_level=-0.07, background_sigma=0.02,
                       organs=organs, air_pockets=pockets, seed=seed)


def random_phantom_spec(
    seed: int,
    shape=(32, 32, 32),
    n_organs=(2, 3),
    organ_mean=(0.3, 0.9),
    organ_sigma=(0.01, 0.04),
    organ_radius=(4.0, 8.0),
    background_level=(-0.08, -0.06),
    background_sigma=(0.02, 0.02),
    air_pockets: int = 1,
) -> PhantomSpec:
    """Draw a random phantom spec that passes ``PhantomSpec.validate``.

    Ranges are ``(low, high)`` pairs sampled uniformly; ``n_organs`` is
    inclusive on both ends.
    """
    rng = np.random.default_rng(seed)
    shape = tuple(int(s) for s in shape)

    def ellipsoid(radius_range, mean=0.0, sigma=0.0):
        radii = tuple(float(min(rng.uniform(*radius_range), (s - 1) / 2.0 - 0.5)) for s in shape)
        center = tuple(float(rng.uniform(r, s - 1 - r)) for r, s in zip(radii, shape))
        return Ellipsoid(center, radii, mean, sigma)

    count = int(rng.integers(n_organs[0], n_organs[1] + 1))
    organs = tuple(
        ellipsoid(organ_radius, float(rng.uniform(*organ_mean)), float(rng.uniform(*organ_sigma)))
        for _ in range(count)
    )
    pocket_radius = (1.0, max(1.5, organ_radius[0] / 2))
    pockets = tuple(ellipsoid(pocket_radius) for _ in range(air_pockets))
    return PhantomSpec(
        shape=shape,
        background_level=float(rng.uniform(*background_level)),
        background_sigma=float(rng.uniform(*background_sigma)),
        organs=organs,
        air_pockets=pockets,
        seed=int(rng.integers(0, 2**31 - 1)),
    )
