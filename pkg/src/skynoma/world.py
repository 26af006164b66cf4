"""Disaster-area map, vehicle routing, and user mobility.

The map is a Manhattan lattice: building blocks separated by one-cell road
corridors. Road cells carry a static speed cost (debris), so a vehicle on
cell (x, y) moves at v_max - cost. Routes are travel-time-optimal and users
advance along them with exact piecewise integration: the result of
``advance_user`` is independent of how a time interval is subdivided.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

__all__ = [
    "GridMap",
    "UserState",
    "InvalidCellError",
    "UnreachableError",
    "build_map",
    "shortest_path",
    "advance_user",
    "make_user",
    "map_to_text",
    "sample_destinations",
    "sample_team_destinations",
]

Cell = tuple[int, int]

COST_CAP_FRACTION = 0.7  # speed costs are drawn from U(0, 0.7 * v_max)


class InvalidCellError(ValueError):
    """A referenced cell is outside the map or blocked by a building."""


class UnreachableError(RuntimeError):
    """No unblocked route exists between the requested cells."""


@dataclass(frozen=True)
class GridMap:
    """Immutable occupancy/cost lattice. Arrays are indexed [x, y]."""

    width: int
    height: int
    cell_size: float
    v_max: float
    blocked: np.ndarray
    speed_cost: np.ndarray
    origin: Cell

    def __post_init__(self):
        self.blocked.setflags(write=False)
        self.speed_cost.setflags(write=False)

    def in_bounds(self, cell: Cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def is_road(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and not self.blocked[cell]

    def speed_at(self, cell: Cell) -> float:
        """Vehicle speed on a cell: v_max minus its debris cost."""
        return self.v_max - float(self.speed_cost[cell])

    def cell_center(self, cell: Cell) -> tuple[float, float]:
        x, y = cell
        return ((x + 0.5) * self.cell_size, (y + 0.5) * self.cell_size)

    def cell_of(self, position: tuple[float, float]) -> Cell:
        px, py = position
        x = min(self.width - 1, max(0, int(px // self.cell_size)))
        y = min(self.height - 1, max(0, int(py // self.cell_size)))
        return (x, y)


def build_map(
    width: int,
    height: int,
    block_layout_seed: int,
    cost_seed: int,
    *,
    v_max: float = 10.0,
    cell_size: float = 10.0,
    block_size: int = 3,
) -> GridMap:
    """Generate a Manhattan map with seeded road phase and debris costs."""
    if width < 3 or height < 3:
        raise ValueError("map must be at least 3x3 cells")
    if v_max <= 0 or cell_size <= 0:
        raise ValueError("v_max and cell_size must be positive")

    layout_rng = np.random.default_rng(block_layout_seed)
    period = block_size + 1
    phase_x = int(layout_rng.integers(0, period))
    phase_y = int(layout_rng.integers(0, period))

    xs = np.arange(width)[:, None]
    ys = np.arange(height)[None, :]
    road = ((xs - phase_x) % period == 0) | ((ys - phase_y) % period == 0)
    blocked = ~road

    cost_rng = np.random.default_rng(cost_seed)
    speed_cost = np.zeros((width, height))
    speed_cost[road] = cost_rng.uniform(0.0, COST_CAP_FRACTION * v_max, size=int(road.sum()))

    origin = _nearest_road(road, (width // 2, height // 2))
    return GridMap(
        width=width,
        height=height,
        cell_size=cell_size,
        v_max=v_max,
        blocked=blocked,
        speed_cost=speed_cost,
        origin=origin,
    )


def _nearest_road(road: np.ndarray, target: Cell) -> Cell:
    candidates = np.argwhere(road)
    tx, ty = target
    dist = np.abs(candidates[:, 0] - tx) + np.abs(candidates[:, 1] - ty)
    best = np.lexsort((candidates[:, 1], candidates[:, 0], dist))[0]
    return (int(candidates[best, 0]), int(candidates[best, 1]))


def shortest_path(grid: GridMap, from_cell: Cell, to_cell: Cell) -> tuple[Cell, ...]:
    """Minimum-travel-time route between two road cells.

    Edge weight is the time to cross into a neighbouring cell:
    cell_size / speed of the entered cell. Ties resolve to the
    lexicographically smallest cell ordering, so results are reproducible.
    """
    for cell in (from_cell, to_cell):
        if not grid.in_bounds(cell):
            raise InvalidCellError(f"cell {cell} is outside the map")
        if grid.blocked[cell]:
            raise InvalidCellError(f"cell {cell} is blocked")

    dist: dict[Cell, float] = {from_cell: 0.0}
    parent: dict[Cell, Cell] = {}
    done: set[Cell] = set()
    heap: list[tuple[float, Cell]] = [(0.0, from_cell)]
    while heap:
        d, cell = heapq.heappop(heap)
        if cell in done:
            continue
        done.add(cell)
        if cell == to_cell:
            break
        x, y = cell
        for nb in ((x, y - 1), (x - 1, y), (x + 1, y), (x, y + 1)):
            if not grid.is_road(nb) or nb in done:
                continue
            nd = d + grid.cell_size / grid.speed_at(nb)
            if nb not in dist or nd < dist[nb]:
                dist[nb] = nd
                parent[nb] = cell
                heapq.heappush(heap, (nd, nb))
            elif nd == dist[nb] and cell < parent[nb]:
                parent[nb] = cell
    if to_cell not in done:
        raise UnreachableError(f"no route from {from_cell} to {to_cell}")

    route = [to_cell]
    while route[-1] != from_cell:
        route.append(parent[route[-1]])
    route.reverse()
    return tuple(route)


@dataclass(frozen=True)
class UserState:
    """A vehicle following a fixed route at map-dictated speeds."""

    id: int
    route: tuple[Cell, ...]
    segment: int  # route cell index whose half-segments contain the position
    offset_m: float  # arc length travelled from the route start
    v_max: float

    @property
    def destination(self) -> Cell:
        return self.route[-1]

    @property
    def arrived(self) -> bool:
        return self.segment >= len(self.route) - 1 and self.offset_m >= self.route_length_factor()

    def route_length_factor(self) -> float:
        return float(len(self.route) - 1)

    def position(self, grid: GridMap) -> tuple[float, float]:
        """Continuous position along the route's center-to-center polyline."""
        if len(self.route) == 1:
            return grid.cell_center(self.route[0])
        s = min(self.offset_m, (len(self.route) - 1) * grid.cell_size)
        i = min(int(s // grid.cell_size), len(self.route) - 2)
        frac = s / grid.cell_size - i
        ax, ay = grid.cell_center(self.route[i])
        bx, by = grid.cell_center(self.route[i + 1])
        return (ax + (bx - ax) * frac, ay + (by - ay) * frac)

    def current_cell(self, grid: GridMap) -> Cell:
        """The route cell whose interior contains the current position."""
        if len(self.route) == 1:
            return self.route[0]
        idx = int(math.floor(self.offset_m / grid.cell_size + 0.5))
        return self.route[min(idx, len(self.route) - 1)]


def make_user(user_id: int, grid: GridMap, destination: Cell) -> UserState:
    """A user departing the origin along the time-optimal route."""
    route = shortest_path(grid, grid.origin, destination)
    return UserState(id=user_id, route=route, segment=0, offset_m=0.0, v_max=grid.v_max)


def advance_user(user: UserState, grid: GridMap, dt_seconds: float) -> UserState:
    """Move a user along its route for ``dt_seconds``.

    Speed switches exactly at cell boundaries (segment midpoints), so the
    motion is the exact integral of the per-cell speeds; completed users
    hold position.
    """
    if dt_seconds <= 0:
        raise ValueError("dt must be positive")
    n_cells = len(user.route)
    total = (n_cells - 1) * grid.cell_size
    s = user.offset_m
    if s >= total:
        return user

    remaining = dt_seconds
    half = grid.cell_size / 2.0
    while remaining > 0 and s < total:
        idx = min(int(math.floor(s / grid.cell_size + 0.5)), n_cells - 1)
        speed = grid.speed_at(user.route[idx])
        boundary = total if idx >= n_cells - 1 else (idx * grid.cell_size + half)
        gap = boundary - s
        if gap <= 0:  # numerical guard at exact boundaries
            s = boundary
            continue
        t_need = gap / speed
        if t_need >= remaining:
            s += speed * remaining
            remaining = 0.0
        else:
            s = boundary
            remaining -= t_need
    s = min(s, total)
    segment = min(int(s // grid.cell_size), max(n_cells - 2, 0))
    return replace(user, segment=segment, offset_m=s)


def map_to_text(grid: GridMap) -> str:
    """One char per cell: '#' for buildings, cost decile digit for roads.

    Rows are emitted top to bottom (y descending) so the text reads like a
    map; used for golden-file comparisons.
    """
    cap = COST_CAP_FRACTION * grid.v_max
    lines = []
    for y in range(grid.height - 1, -1, -1):
        chars = []
        for x in range(grid.width):
            if grid.blocked[x, y]:
                chars.append("#")
            else:
                decile = min(9, int(10.0 * grid.speed_cost[x, y] / cap))
                chars.append(str(decile))
        lines.append("".join(chars))
    return "\n".join(lines) + "\n"


def _perimeter_ring(grid: GridMap) -> list[Cell]:
    """Unblocked outer-ring cells in cyclic walk order around the map."""
    w, h = grid.width, grid.height
    walk = [(x, 0) for x in range(w)]
    walk += [(w - 1, y) for y in range(1, h)]
    walk += [(x, h - 1) for x in range(w - 2, -1, -1)]
    walk += [(0, y) for y in range(h - 2, 0, -1)]
    ring = [c for c in walk if not grid.blocked[c]]
    if not ring:
        raise ValueError("map has no unblocked perimeter cells")
    return ring


def sample_destinations(grid: GridMap, count: int, rng: np.random.Generator) -> list[Cell]:
    """Seeded uniform draw of destination cells on the map's outer ring."""
    ring = _perimeter_ring(grid)
    picks = rng.integers(0, len(ring), size=count)
    return [ring[int(i)] for i in picks]


def sample_team_destinations(
    grid: GridMap, team_sizes: Sequence[int], rng: np.random.Generator, spread: int = 1
) -> list[Cell]:
    """Destinations for teams deploying together to distinct incident sites.

    One perimeter site per team (kept at least a quarter of the ring
    apart), with team members assigned to adjacent ring cells so they
    travel as a group without stacking on one cell. Returns per-user
    destinations, in team order after a seeded shuffle of the users.
    """
    ring = _perimeter_ring(grid)
    n_teams = len(team_sizes)
    min_gap = max(1, len(ring) // (4 * n_teams))
    sites: list[int] = []
    for _ in range(200):
        idx = int(rng.integers(0, len(ring)))
        if all(min(abs(idx - s), len(ring) - abs(idx - s)) >= min_gap for s in sites):
            sites.append(idx)
            if len(sites) == n_teams:
                break
    while len(sites) < n_teams:  # tiny rings: give up on spacing
        sites.append(int(rng.integers(0, len(ring))))

    order = rng.permutation(sum(team_sizes))
    destinations: list[Cell] = [grid.origin] * len(order)
    user_pos = 0
    for site, size in zip(sites, team_sizes):
        for offset in range(size):
            cell = ring[(site + offset * max(1, spread)) % len(ring)]
            destinations[order[user_pos]] = cell
            user_pos += 1
    return destinations
