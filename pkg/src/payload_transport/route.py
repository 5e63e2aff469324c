"""Spatial planning on the lattice: weighted A*, line-of-sight simplification
and the piecewise-linear waypoint path.

Indices are integer triples ``(i, j, k)``; the lattice point of an index is
``delta * (i, j, k)``. A lattice column ``(i, j)`` owns the closed square of
side ``delta`` centred on it, and an index is free when ``k`` is above the
column's level in the discrete expanded map.
"""

import heapq
import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import DomainError, NoPathError
from .terrain import (
    DiscreteElevationMap,
    ElevationMap,
    discretize,
    index_to_world,
    world_to_index,
)

_OFFSETS = tuple(
    (d, math.sqrt(d[0] ** 2 + d[1] ** 2 + d[2] ** 2))
    for d in itertools.product((-1, 0, 1), repeat=3)
    if d != (0, 0, 0)
)
_TOL = 1e-9


@dataclass(frozen=True)
class PlannerConfig:
    """Lattice search settings.

    Attributes:
        delta: lattice resolution, metres.
        weight: heuristic inflation ``w >= 1``.
        max_expansions: search budget.
        literal_weight: also scale edge costs by ``weight``. With this set the
            weight cancels out of the ordering and the search behaves as
            plain A*.
        ceiling: highest level searched. ``None`` uses one level above the
            tallest column (or the start/goal, if higher); flying higher
            than that never shortens a path.
    """

    delta: float = 1.0
    weight: float = 1.1
    max_expansions: int = 10 ** 7
    literal_weight: bool = False
    ceiling: Optional[int] = None

    def __post_init__(self):
        if not self.delta > 0:
            raise DomainError(f"delta must be positive, got {self.delta}")
        if not self.weight >= 1:
            raise DomainError(f"weight must be >= 1, got {self.weight}")


class DiscretePath(NamedTuple):
    indices: tuple
    cost: float
    expansions: int = 0


def neighbors(index):
    """The 26 indices sharing a face, edge or corner with ``index``."""
    i, j, k = index
    return [(i + d[0], j + d[1], k + d[2]) for d, _ in _OFFSETS]


def path_cost(indices, delta: float = 1.0) -> float:
    return delta * sum(math.dist(a, b) for a, b in zip(indices, indices[1:]))


def _move_allowed(dmap, a, b):
    """Whether the straight move between two free 26-adjacent indices stays
    clear. Only horizontal diagonals can graze another column: they pass the
    shared corner of the two side columns at mid height."""
    di, dj = b[0] - a[0], b[1] - a[1]
    if di == 0 or dj == 0:
        return True
    limit = a[2] + b[2]  # 2 * (mid height) in lattice units
    for side in ((a[0] + di, a[1]), (a[0], a[1] + dj)):
        level = dmap.get(*side)
        if level is None or 2 * level + 1 > limit:
            return False
    return True


def astar(start, goal, dmap: DiscreteElevationMap, config: PlannerConfig = PlannerConfig()) -> DiscretePath:
    """Weighted A* over an on-demand lattice.

    Edge cost is the Euclidean length of the move, the priority is
    ``g + w * |index - goal|`` and ties go to the lower heuristic, then the
    lexicographically smaller index. Only free indices are generated, and a
    diagonal move may not cut past a column that rises above its midpoint.

    Raises:
        NoPathError: if start or goal is not free, the open set runs dry or
            the expansion budget is spent.
    """
    start = tuple(int(v) for v in start)
    goal = tuple(int(v) for v in goal)
    for name, idx in (("start", start), ("goal", goal)):
        if not dmap.is_free(idx):
            raise NoPathError(f"{name} index {idx} is not above the expanded map")
    if start == goal:
        return DiscretePath((start,), 0.0, 0)

    ceiling = config.ceiling
    if ceiling is None:
        ceiling = max(int(dmap.levels.max()) + 1, start[2], goal[2])
    w = config.weight
    edge_scale = w if config.literal_weight else 1.0
    delta = config.delta

    def h(idx):
        return delta * math.dist(idx, goal)

    g = {start: 0.0}
    parent = {start: None}
    closed = set()
    h0 = h(start)
    heap = [(w * h0, h0, start)]
    expansions = 0
    while heap:
        f, hh, idx = heapq.heappop(heap)
        if idx in closed:
            continue
        if idx == goal:
            break
        closed.add(idx)
        expansions += 1
        if expansions > config.max_expansions:
            raise NoPathError(f"expansion budget {config.max_expansions} exhausted")
        gi = g[idx]
        i, j, k = idx
        for d, length in _OFFSETS:
            nb = (i + d[0], j + d[1], k + d[2])
            if nb in closed or nb[2] > ceiling:
                continue
            level = dmap.get(nb[0], nb[1])
            if level is None or nb[2] <= level:
                continue
            if not _move_allowed(dmap, idx, nb):
                continue
            cand = gi + edge_scale * delta * length
            if cand < g.get(nb, math.inf):
                g[nb] = cand
                parent[nb] = idx
                hn = h(nb)
                heapq.heappush(heap, (cand + w * hn, hn, nb))
    else:
        raise NoPathError(f"no path from {start} to {goal}")

    out = [goal]
    while parent[out[-1]] is not None:
        out.append(parent[out[-1]])
    out.reverse()
    return DiscretePath(tuple(out), path_cost(out, delta), expansions)


def connectable(a, b, dmap: DiscreteElevationMap, delta: float = 1.0) -> bool:
    """Whether the straight segment between two indices clears the map.

    Every column whose closed square the segment's ground track touches is
    checked against the lowest height the segment has over that square. A
    column at level ``L`` keeps the expanded surface strictly below
    ``delta * (L + 1/2)``, so that height is the clearance threshold.
    Computed in lattice units; ``delta`` only sets the scale.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if np.array_equal(a, b):
        return dmap.is_free(tuple(int(v) for v in a))
    d = b - a

    def span(axis):
        lo_c = math.ceil(min(a[axis], b[axis]) - 0.5)
        hi_c = math.floor(max(a[axis], b[axis]) + 0.5)
        cells = np.arange(lo_c, hi_c + 1)
        if d[axis] == 0:
            return cells, np.zeros(cells.size), np.ones(cells.size)
        s1 = (cells - 0.5 - a[axis]) / d[axis]
        s2 = (cells + 0.5 - a[axis]) / d[axis]
        return cells, np.clip(np.minimum(s1, s2), 0, 1), np.clip(np.maximum(s1, s2), 0, 1)

    ci, lo_i, hi_i = span(0)
    cj, lo_j, hi_j = span(1)
    lo = np.maximum(lo_i[:, None], lo_j[None, :])
    hi = np.minimum(hi_i[:, None], hi_j[None, :])
    touched = lo <= hi + 1e-12
    zmin = a[2] + d[2] * np.where(d[2] >= 0, lo, hi)
    for (p, q) in zip(*np.nonzero(touched)):
        level = dmap.get(int(ci[p]), int(cj[q]))
        if level is None or zmin[p, q] < level + 0.5 - _TOL:
            return False
    return True


def simplify(path, dmap: DiscreteElevationMap, delta: float = 1.0):
    """Drop intermediate indices that the previous kept index can see past.

    A greedy pass keeps an anchor and skips ahead while the next index stays
    connectable to it; when it is not, the last visible index becomes the new
    anchor. Passes repeat until nothing changes, so the result is a fixed
    point (and applying this again returns it unchanged).
    """
    indices = tuple(tuple(int(v) for v in idx) for idx in getattr(path, "indices", path))
    while True:
        out = _greedy_pass(indices, dmap, delta)
        if out == indices:
            break
        indices = out
    if isinstance(path, DiscretePath):
        return DiscretePath(indices, path_cost(indices, delta), path.expansions)
    return indices


def _greedy_pass(indices, dmap, delta):
    if len(indices) <= 2:
        return indices
    anchor = indices[0]
    out = [anchor]
    for n in range(1, len(indices)):
        if not connectable(anchor, indices[n], dmap, delta):
            prev = indices[n - 1]
            if prev != anchor:
                anchor = prev
                out.append(anchor)
            # raw lattice moves are always connectable; kept for safety
            if not connectable(anchor, indices[n], dmap, delta):
                anchor = indices[n]
                out.append(anchor)
    if out[-1] != indices[-1]:
        out.append(indices[-1])
    return tuple(out)


class WaypointPath:
    """Piecewise-linear path through ``points`` (N x 3, metres)."""

    def __init__(self, points):
        pts = np.array(points, dtype=np.float64).reshape(-1, 3)
        if len(pts) == 0:
            raise DomainError("a waypoint path needs at least one point")
        pts.setflags(write=False)
        self.points = pts

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def segments(self):
        return list(zip(self.points[:-1], self.points[1:]))

    def length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.points, axis=0), axis=1)))

    def __call__(self, u):
        return eval_spatial(self, u)


def to_waypoints(path, delta: float) -> WaypointPath:
    indices = getattr(path, "indices", path)
    return WaypointPath([index_to_world(idx, delta) for idx in indices])


def eval_spatial(wp: WaypointPath, u: float) -> np.ndarray:
    """Point at parameter ``u`` in [1, N]; ``u = n`` gives waypoint n."""
    n_pts = len(wp)
    if not (1 <= u <= n_pts):
        raise DomainError(f"u = {u} outside [1, {n_pts}]")
    n = min(int(math.floor(u)), n_pts - 1) if n_pts > 1 else 1
    if n_pts == 1:
        return wp.points[0].copy()
    p0, p1 = wp.points[n - 1], wp.points[n]
    return p0 + (u - n) * (p1 - p0)


class RoutePlan(NamedTuple):
    raw: DiscretePath
    simplified: DiscretePath
    waypoints: WaypointPath
    discrete_map: DiscreteElevationMap


def lift_index(index, dmap: DiscreteElevationMap):
    """``index`` raised to just above its column, if the column covers it."""
    level = dmap.get(index[0], index[1])
    if level is None or index[2] > level:
        return index
    return (index[0], index[1], level + 1)


def plan_route(start, goal, expanded: ElevationMap, config: PlannerConfig = PlannerConfig(),
               dmap: Optional[DiscreteElevationMap] = None) -> RoutePlan:
    """Search, simplify and convert a route between two world points.

    An endpoint whose nearest index falls inside a (conservatively rounded)
    column is lifted to the lowest free index of that column.
    """
    if dmap is None:
        dmap = discretize(expanded, config.delta)
    s = lift_index(world_to_index(start, config.delta), dmap)
    g = lift_index(world_to_index(goal, config.delta), dmap)
    raw = astar(s, g, dmap, config)
    simple = simplify(raw, dmap, config.delta)
    return RoutePlan(raw, simple, to_waypoints(simple, config.delta), dmap)
