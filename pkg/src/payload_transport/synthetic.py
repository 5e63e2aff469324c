"""Seeded synthetic urban terrain: flat-roofed rectangular buildings on
gently rolling ground.

All random draws are integers from numpy's PCG64 generator, which produces
the same stream on every platform; heights are integer millimetres or
decimetres before the final conversion, so maps are bit-identical per seed.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .terrain import ElevationMap


@dataclass(frozen=True)
class SynthParams:
    """Generator settings (lengths in metres).

    Attributes:
        width, length: footprint extent along x and y.
        cell: grid cell size.
        density: target fraction of cells covered by buildings.
        height_min, height_max: building height above local ground.
        size_min, size_max: building edge length range.
        base: ground altitude.
        relief: peak-to-peak ground undulation.
        origin: lower-left corner of the footprint.
    """

    width: float = 100.0
    length: float = 100.0
    cell: float = 1.0
    seed: int = 0
    density: float = 0.1
    height_min: float = 5.0
    height_max: float = 20.0
    size_min: float = 4.0
    size_max: float = 14.0
    base: float = 0.0
    relief: float = 2.0
    origin: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not (self.width > 0 and self.length > 0 and self.cell > 0):
            raise DomainError("extents and cell size must be positive")
        if not 0 <= self.density < 1:
            raise DomainError(f"density must be in [0, 1), got {self.density}")
        if self.height_min > self.height_max or self.height_min < 0:
            raise DomainError("need 0 <= height_min <= height_max")
        if not 0 < self.size_min <= self.size_max:
            raise DomainError("need 0 < size_min <= size_max")
        if self.relief < 0:
            raise DomainError("relief must be non-negative")


_GROUND_SPACING = 25.0


def _ground(rng, nx, ny, cell, relief):
    """Bilinear upsampling of a coarse lattice of integer-millimetre knots."""
    kx = int(np.ceil(nx * cell / _GROUND_SPACING)) + 1
    ky = int(np.ceil(ny * cell / _GROUND_SPACING)) + 1
    top = int(round(relief * 1000))
    knots = rng.integers(0, top + 1, size=(ky, kx)).astype(np.float64) / 1000.0
    fx = (np.arange(nx) + 0.5) * cell / _GROUND_SPACING
    fy = (np.arange(ny) + 0.5) * cell / _GROUND_SPACING
    cx = np.minimum(fx.astype(int), kx - 2)
    cy = np.minimum(fy.astype(int), ky - 2)
    tx = (fx - cx)[None, :]
    ty = (fy - cy)[:, None]
    k00 = knots[np.ix_(cy, cx)]
    k01 = knots[np.ix_(cy, cx + 1)]
    k10 = knots[np.ix_(cy + 1, cx)]
    k11 = knots[np.ix_(cy + 1, cx + 1)]
    return (k00 * (1 - tx) + k01 * tx) * (1 - ty) + (k10 * (1 - tx) + k11 * tx) * ty


def synth_ground_and_map(params: SynthParams):
    """Return ``(ground, map)``; ``ground`` is the bare-earth height grid."""
    nx = max(2, int(round(params.width / params.cell)))
    ny = max(2, int(round(params.length / params.cell)))
    rng = np.random.default_rng(params.seed)
    ground = np.round(params.base + _ground(rng, nx, ny, params.cell, params.relief), 4)
    heights = ground.copy()

    covered = np.zeros((ny, nx), dtype=bool)
    smin = max(1, int(round(params.size_min / params.cell)))
    smax = max(smin, int(round(params.size_max / params.cell)))
    hmin = int(round(params.height_min * 10))
    hmax = int(round(params.height_max * 10))
    target = params.density * nx * ny
    attempts = 0
    while covered.sum() < target and attempts < 10000:
        attempts += 1
        w = int(rng.integers(smin, smax + 1))
        h = int(rng.integers(smin, smax + 1))
        c0 = int(rng.integers(0, max(1, nx - w + 1)))
        r0 = int(rng.integers(0, max(1, ny - h + 1)))
        rise = int(rng.integers(hmin, hmax + 1)) / 10.0
        block = (slice(r0, r0 + h), slice(c0, c0 + w))
        roof = ground[block].max() + rise
        heights[block] = np.maximum(heights[block], roof)
        covered[block] = True
    return ground, ElevationMap(params.origin, params.cell, heights)


def synth_terrain(params: SynthParams) -> ElevationMap:
    return synth_ground_and_map(params)[1]
