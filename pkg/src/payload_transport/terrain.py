"""Elevation maps: storage, grid-file I/O, interpolation, clearance expansion
and discretization onto the planning lattice.

Heights are stored row-major with row 0 at the *smallest* y; the grid file
lists the top (largest y) row first, so rows are flipped on read and write.
"""

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError, GridParseError

_HEADER = ("ncols", "nrows", "xll", "yll", "cellsize")
_EDGE_TOL = 1e-9


class Space(enum.Enum):
    FREE = "free"
    OBSTACLE = "obstacle"


@dataclass(frozen=True, eq=False)
class ElevationMap:
    """Height field sampled at cell centres.

    Attributes:
        origin: (x, y) of the lower-left corner of the grid footprint, metres.
        cell_size: edge length of a square cell, metres.
        heights: array of shape (height, width); ``heights[r, c]`` is the
            altitude at the centre of column ``c`` / row ``r``.
    """

    origin: tuple
    cell_size: float
    heights: np.ndarray = field(repr=False)

    def __post_init__(self):
        h = np.array(self.heights, dtype=np.float64)
        if h.ndim != 2:
            raise DomainError("heights must be a 2-D array")
        if h.shape[0] < 2 or h.shape[1] < 2:
            raise DomainError(f"grid must be at least 2x2, got {h.shape[1]}x{h.shape[0]}")
        if not np.all(np.isfinite(h)):
            raise DomainError("heights must be finite")
        if not (self.cell_size > 0 and math.isfinite(self.cell_size)):
            raise DomainError(f"cell_size must be positive, got {self.cell_size}")
        h.setflags(write=False)
        object.__setattr__(self, "heights", h)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        object.__setattr__(self, "cell_size", float(self.cell_size))

    @property
    def width(self) -> int:
        return self.heights.shape[1]

    @property
    def height(self) -> int:
        return self.heights.shape[0]

    @property
    def bounds(self):
        """(xmin, xmax, ymin, ymax) of the footprint."""
        x0, y0 = self.origin
        return (x0, x0 + self.width * self.cell_size, y0, y0 + self.height * self.cell_size)

    def cell_centers(self):
        x0, y0 = self.origin
        xs = x0 + (np.arange(self.width) + 0.5) * self.cell_size
        ys = y0 + (np.arange(self.height) + 0.5) * self.cell_size
        return xs, ys

    def contains(self, x, y) -> bool:
        xmin, xmax, ymin, ymax = self.bounds
        return bool(
            xmin - _EDGE_TOL <= x <= xmax + _EDGE_TOL and ymin - _EDGE_TOL <= y <= ymax + _EDGE_TOL
        )

    def with_heights(self, heights) -> "ElevationMap":
        return ElevationMap(self.origin, self.cell_size, heights)

    def __call__(self, x, y):
        return sample(self, x, y)


# -- grid file ---------------------------------------------------------------


def load_map(document: str) -> ElevationMap:
    """Parse a grid text document into an :class:`ElevationMap`."""
    lines = document.splitlines()
    header = {}
    for n, key in enumerate(_HEADER):
        lineno = n + 1
        if n >= len(lines):
            raise GridParseError(f"missing header field '{key}'", lineno)
        parts = lines[n].split()
        if len(parts) != 2 or parts[0].lower() != key:
            raise GridParseError(f"expected '{key} <value>', got {lines[n]!r}", lineno)
        try:
            value = int(parts[1]) if key in ("ncols", "nrows") else _parse_real(parts[1])
        except ValueError:
            raise GridParseError(f"bad value for '{key}': {parts[1]!r}", lineno) from None
        header[key] = value

    ncols, nrows = header["ncols"], header["nrows"]
    if ncols < 2 or nrows < 2:
        raise GridParseError(f"grid must be at least 2x2, got {ncols}x{nrows}", 1)
    if header["cellsize"] <= 0:
        raise GridParseError("cellsize must be positive", 5)

    rows = []
    lineno = len(_HEADER)
    for raw in lines[len(_HEADER):]:
        lineno += 1
        if not raw.strip():
            continue
        values = raw.split()
        if len(values) != ncols:
            raise GridParseError(
                f"row {len(rows) + 1} has {len(values)} values, expected {ncols}", lineno
            )
        try:
            rows.append([_parse_real(v) for v in values])
        except ValueError as exc:
            raise GridParseError(f"row {len(rows) + 1}: {exc}", lineno) from None
    if len(rows) != nrows:
        raise GridParseError(f"expected {nrows} rows, found {len(rows)}", lineno)

    heights = np.array(rows[::-1], dtype=np.float64)
    return ElevationMap((header["xll"], header["yll"]), header["cellsize"], heights)


def _parse_real(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {text!r}")
    return value


def dump_map(emap: ElevationMap) -> str:
    """Serialize a map to the grid text format (round-trips exactly)."""
    out = [
        f"ncols {emap.width}",
        f"nrows {emap.height}",
        f"xll {emap.origin[0]!r}",
        f"yll {emap.origin[1]!r}",
        f"cellsize {emap.cell_size!r}",
    ]
    for row in emap.heights[::-1]:
        out.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(out) + "\n"


def read_map(path) -> ElevationMap:
    with open(path, encoding="utf-8") as fh:
        return load_map(fh.read())


def write_map(path, emap: ElevationMap) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dump_map(emap))


# -- continuous queries ------------------------------------------------------


def sample(emap: ElevationMap, x, y, clamp: bool = False):
    """Bilinear interpolation of cell-centre heights.

    Between the outermost cell centres and the footprint edge the nearest
    centre row/column is held constant. Accepts scalars or arrays.

    Raises:
        DomainError: if a query lies outside the footprint and ``clamp`` is
            false.
    """
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if not clamp:
        xmin, xmax, ymin, ymax = emap.bounds
        outside = (
            (xa < xmin - _EDGE_TOL) | (xa > xmax + _EDGE_TOL)
            | (ya < ymin - _EDGE_TOL) | (ya > ymax + _EDGE_TOL)
        )
        if np.any(outside):
            raise DomainError(f"query ({x}, {y}) outside map footprint {emap.bounds}")
    cs = emap.cell_size
    fx = np.clip((xa - emap.origin[0]) / cs - 0.5, 0.0, emap.width - 1)
    fy = np.clip((ya - emap.origin[1]) / cs - 0.5, 0.0, emap.height - 1)
    c0 = np.minimum(np.floor(fx).astype(np.intp), emap.width - 2)
    r0 = np.minimum(np.floor(fy).astype(np.intp), emap.height - 2)
    tx = fx - c0
    ty = fy - r0
    h = emap.heights
    lower = h[r0, c0] * (1.0 - tx) + h[r0, c0 + 1] * tx
    upper = h[r0 + 1, c0] * (1.0 - tx) + h[r0 + 1, c0 + 1] * tx
    z = lower * (1.0 - ty) + upper * ty
    return float(z) if z.ndim == 0 else z


def classify(point, emap: ElevationMap) -> Space:
    """Free iff strictly above the surface; the surface itself is obstacle."""
    x, y, z = point
    return Space.OBSTACLE if z <= sample(emap, x, y) else Space.FREE


def expand(emap: ElevationMap, radius: float) -> ElevationMap:
    """Spherical dilation of the obstacle region by ``radius``.

    Each cell takes the highest point of any sphere of the given radius
    centred on the surface within horizontal reach. Sphere centres are taken
    on the interpolated surface every half cell (cell centres, edge
    midpoints and corners); using the centres alone lets the interpolated
    result sag between steep neighbours.
    """
    if radius < 0 or not math.isfinite(radius):
        raise DomainError(f"radius must be non-negative, got {radius}")
    if radius == 0:
        return emap.with_heights(emap.heights.copy())
    nr, nc = emap.heights.shape
    half = 0.5 * emap.cell_size
    # half-cell lattice over the footprint; cell centres sit at odd indices
    fy = emap.origin[1] + half * np.arange(2 * nr + 1)
    fx = emap.origin[0] + half * np.arange(2 * nc + 1)
    gx, gy = np.meshgrid(fx, fy)
    src = sample(emap, gx, gy, clamp=True)
    fine = src + radius
    reach = int(math.floor(radius / half))
    out = emap.heights + radius
    rows = slice(1, 2 * nr, 2)
    cols = slice(1, 2 * nc, 2)
    ny, nx = src.shape
    for di in range(-reach, reach + 1):
        for dj in range(-reach, reach + 1):
            dist2 = (di * di + dj * dj) * half * half
            if (di == 0 and dj == 0) or dist2 > radius * radius:
                continue
            lift = math.sqrt(radius * radius - dist2)
            shifted = np.full_like(src, -np.inf)
            rs = slice(max(0, -di), min(ny, ny - di))
            cs = slice(max(0, -dj), min(nx, nx - dj))
            shifted[rs, cs] = src[rs.start + di:rs.stop + di, cs.start + dj:cs.stop + dj]
            np.maximum(fine, shifted + lift, out=fine)
    np.maximum(out, fine[rows, cols], out=out)
    return emap.with_heights(out)


# -- planning lattice --------------------------------------------------------


def world_to_index(point, delta: float):
    """Nearest lattice index ``floor(v / delta + 1/2)`` per axis."""
    if not delta > 0:
        raise DomainError(f"resolution must be positive, got {delta}")
    return tuple(int(math.floor(v / delta + 0.5)) for v in point)


def index_to_world(index, delta: float):
    if not delta > 0:
        raise DomainError(f"resolution must be positive, got {delta}")
    return tuple(float(delta * i) for i in index)


class DiscreteElevationMap:
    """Highest occupied lattice level per horizontal index.

    Indices outside the covered range have no entry; callers treat them as
    blocked.
    """

    def __init__(self, delta: float, i0: int, j0: int, levels):
        self.delta = float(delta)
        self.i0 = int(i0)
        self.j0 = int(j0)
        self.levels = np.asarray(levels, dtype=np.int64)
        self.levels.setflags(write=False)
        self._rows = self.levels.tolist()

    @property
    def shape(self):
        return self.levels.shape

    def get(self, i: int, j: int, default: Optional[int] = None):
        a = i - self.i0
        b = j - self.j0
        if 0 <= a < len(self._rows) and 0 <= b < len(self._rows[0]):
            return self._rows[a][b]
        return default

    def __getitem__(self, ij):
        k = self.get(*ij)
        if k is None:
            raise KeyError(ij)
        return k

    def __contains__(self, ij):
        return self.get(*ij) is not None

    def is_free(self, index) -> bool:
        """True iff the index lies strictly above the map and inside it."""
        k = self.get(index[0], index[1])
        return k is not None and index[2] > k

    @classmethod
    def constant(cls, level: int, i_range, j_range, delta: float = 1.0):
        """Uniform map over inclusive index ranges (mostly for tests)."""
        ni = i_range[1] - i_range[0] + 1
        nj = j_range[1] - j_range[0] + 1
        return cls(delta, i_range[0], j_range[0], np.full((ni, nj), level, dtype=np.int64))


def _critical_coords(lo_edges, hi_edges, centers, delta):
    """Sorted coordinates at which the per-cell maximum of a bilinear field
    must be checked: cell edges, a 3-point sub-grid and every grid line."""
    mids = 0.5 * (lo_edges + hi_edges)
    coords = np.concatenate([lo_edges, hi_edges, mids, centers])
    lo, hi = lo_edges.min(), hi_edges.max()
    coords = coords[(coords >= lo) & (coords <= hi)]
    return np.unique(coords)


def discretize(emap: ElevationMap, delta: float) -> DiscreteElevationMap:
    """Highest lattice level touched by the field over each lattice cell.

    The maximum of a bilinear field over a rectangle is attained at a patch
    corner, so sampling every cell corner, every grid-line crossing and a
    3x3 sub-grid yields the exact per-cell maximum.
    """
    if not delta > 0:
        raise DomainError(f"resolution must be positive, got {delta}")
    xmin, xmax, ymin, ymax = emap.bounds
    # only indices whose lattice point lies on the map
    i_lo = int(math.ceil(xmin / delta - 1e-9))
    i_hi = int(math.floor(xmax / delta + 1e-9))
    j_lo = int(math.ceil(ymin / delta - 1e-9))
    j_hi = int(math.floor(ymax / delta + 1e-9))
    if i_lo > i_hi or j_lo > j_hi:
        raise DomainError(f"resolution {delta} leaves no lattice point on the map")
    ii = np.arange(i_lo, i_hi + 1)
    jj = np.arange(j_lo, j_hi + 1)
    x_lo = np.clip((ii - 0.5) * delta, xmin, xmax)
    x_hi = np.clip((ii + 0.5) * delta, xmin, xmax)
    y_lo = np.clip((jj - 0.5) * delta, ymin, ymax)
    y_hi = np.clip((jj + 0.5) * delta, ymin, ymax)

    xc, yc = emap.cell_centers()
    xs = _critical_coords(x_lo, x_hi, xc, delta)
    ys = _critical_coords(y_lo, y_hi, yc, delta)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    field_ = sample(emap, gx, gy, clamp=True)

    # inclusive [a, b] ranges of sample coordinates per cell
    xa = np.searchsorted(xs, x_lo, side="left")
    xb = np.searchsorted(xs, x_hi, side="right")
    ya = np.searchsorted(ys, y_lo, side="left")
    yb = np.searchsorted(ys, y_hi, side="right")
    per_i = np.stack([field_[a:b].max(axis=0) for a, b in zip(xa, xb)])
    per_ij = np.stack([per_i[:, a:b].max(axis=1) for a, b in zip(ya, yb)], axis=1)
    levels = np.floor(per_ij / delta + 0.5).astype(np.int64)
    return DiscreteElevationMap(delta, i_lo, j_lo, levels)


@dataclass(frozen=True)
class SafetyParams:
    """Vehicle bounding-sphere radius ``epsilon`` (m), tracking bound
    ``delta`` (m) and rotor speed ceiling ``s_max`` (rad/s)."""

    epsilon: float = 0.65
    delta: float = 0.35
    s_max: float = 400.0

    def __post_init__(self):
        for name in ("epsilon", "delta", "s_max"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise DomainError(f"{name} must be positive, got {value}")

    @property
    def clearance(self) -> float:
        return self.epsilon + self.delta
