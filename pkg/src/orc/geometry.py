"""Discretized domain, nearest-robot Voronoi partition, centroids and coverage cost.

Every integral over the domain is a midpoint sum over grid cell centers
multiplied by the cell area.  Densities are accepted either as a callable
mapping an ``(m, 2)`` array of points to ``(m,)`` values or as an array of
values already evaluated at ``grid.points``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

logger = logging.getLogger(__name__)

Density = Union[Callable[[np.ndarray], np.ndarray], np.ndarray]

_DIVISIBILITY_TOL = 1e-9
_ASSIGN_CHUNK_ELEMS = 1 << 21


@dataclass(frozen=True)
class DomainGrid:
    """Rectangle ``[x_min, x_max] x [y_min, y_max]`` split into square cells of side ``h``.

    Cells are ordered row-major with x varying fastest, so cell ``k`` sits at
    column ``k % nx`` and row ``k // nx``.
    """

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    h: float
    nx: int
    ny: int
    points: np.ndarray = field(repr=False, compare=False)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def cell_area(self) -> float:
        return self.h * self.h

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.x_max, self.y_min, self.y_max)

    @property
    def center(self) -> np.ndarray:
        return np.array([(self.x_min + self.x_max) / 2, (self.y_min + self.y_max) / 2])

    def contains(self, positions: np.ndarray) -> bool:
        p = np.atleast_2d(positions)
        return bool(
            np.all(p[:, 0] >= self.x_min)
            and np.all(p[:, 0] <= self.x_max)
            and np.all(p[:, 1] >= self.y_min)
            and np.all(p[:, 1] <= self.y_max)
        )

    def clamp(self, positions: np.ndarray) -> np.ndarray:
        p = np.array(positions, dtype=float, copy=True)
        np.clip(p[..., 0], self.x_min, self.x_max, out=p[..., 0])
        np.clip(p[..., 1], self.y_min, self.y_max, out=p[..., 1])
        return p

    def values(self, density: Density) -> np.ndarray:
        """Evaluate ``density`` at every cell center (arrays pass through after a shape check)."""
        if callable(density):
            vals = np.asarray(density(self.points), dtype=float)
        else:
            vals = np.asarray(density, dtype=float)
        if vals.shape != (self.size,):
            raise ValueError(f"density has shape {vals.shape}, expected ({self.size},)")
        return vals


def _cell_count(length: float, h: float, axis: str) -> int:
    count = round(length / h)
    if count < 1 or abs(count * h - length) > _DIVISIBILITY_TOL * max(1.0, length):
        raise ValueError(
            f"resolution h={h} does not divide the {axis}-extent {length} "
            f"(ratio {length / h:.12g} is not an integer)"
        )
    return int(count)


def build_grid(bounds: tuple[float, float, float, float], h: float) -> DomainGrid:
    """Build the cell-center grid for ``bounds = (x_min, x_max, y_min, y_max)``.

    Raises ``ValueError`` unless ``h`` divides both edge lengths.
    """
    x_min, x_max, y_min, y_max = (float(b) for b in bounds)
    if not (x_max > x_min and y_max > y_min):
        raise ValueError(f"degenerate bounds {bounds}")
    if not h > 0:
        raise ValueError(f"resolution must be positive, got {h}")
    nx = _cell_count(x_max - x_min, h, "x")
    ny = _cell_count(y_max - y_min, h, "y")
    xs = x_min + (np.arange(nx) + 0.5) * h
    ys = y_min + (np.arange(ny) + 0.5) * h
    gx, gy = np.meshgrid(xs, ys)  # rows are y, columns x: ravel gives x fastest
    points = np.column_stack([gx.ravel(), gy.ravel()])
    points.setflags(write=False)
    return DomainGrid(x_min, x_max, y_min, y_max, float(h), nx, ny, points)


@dataclass(frozen=True)
class VoronoiPartition:
    """Owner index (0-based) of every grid cell plus the generating positions."""

    owner: np.ndarray
    robot_positions: np.ndarray

    @property
    def n(self) -> int:
        return len(self.robot_positions)

    def counts(self) -> np.ndarray:
        return np.bincount(self.owner, minlength=self.n)


def assign_voronoi(grid: DomainGrid, positions: np.ndarray) -> VoronoiPartition:
    """Assign each cell to its nearest robot; ties go to the lowest robot index."""
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    if len(pos) == 0:
        raise ValueError("assign_voronoi needs at least one robot position")
    if not np.all(np.isfinite(pos)):
        raise ValueError("robot positions must be finite")
    q = grid.points
    owner = np.empty(len(q), dtype=np.intp)
    chunk = max(1, _ASSIGN_CHUNK_ELEMS // len(pos))
    for start in range(0, len(q), chunk):
        blk = q[start : start + chunk]
        d2 = (blk[:, None, 0] - pos[None, :, 0]) ** 2 + (blk[:, None, 1] - pos[None, :, 1]) ** 2
        owner[start : start + chunk] = np.argmin(d2, axis=1)  # first minimum wins ties
    return VoronoiPartition(owner=owner, robot_positions=pos.copy())


def centroids(
    partition: VoronoiPartition, density: Density, grid: DomainGrid
) -> tuple[np.ndarray, np.ndarray]:
    """Density-weighted centroid of every Voronoi cell.

    Returns ``(c, empty)`` where ``empty[i]`` marks robots whose cell has no
    cells or zero mass; those robots get their own position back.
    """
    f = grid.values(density)
    n = partition.n
    mass = np.bincount(partition.owner, weights=f, minlength=n)
    mx = np.bincount(partition.owner, weights=f * grid.points[:, 0], minlength=n)
    my = np.bincount(partition.owner, weights=f * grid.points[:, 1], minlength=n)
    empty = ~(mass > 0)
    c = partition.robot_positions.copy()
    ok = ~empty
    c[ok, 0] = mx[ok] / mass[ok]
    c[ok, 1] = my[ok] / mass[ok]
    if np.any(empty):
        logger.warning("empty Voronoi cell for robots %s; holding position", np.flatnonzero(empty).tolist())
    return c, empty


def centroid(partition: VoronoiPartition, density: Density, grid: DomainGrid, i: int) -> np.ndarray:
    """Centroid of robot ``i``'s cell (0-based index)."""
    c, _ = centroids(partition, density, grid)
    return c[i]


def locational_cost(
    positions: np.ndarray,
    density: Density,
    grid: DomainGrid,
    partition: VoronoiPartition | None = None,
) -> float:
    """Coverage cost: sum over cells of squared distance to the owning robot times density."""
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    if partition is None:
        partition = assign_voronoi(grid, pos)
    f = grid.values(density)
    diff = grid.points - pos[partition.owner]
    d2 = diff[:, 0] ** 2 + diff[:, 1] ** 2
    return float(math.fsum(d2 * f) * grid.cell_area)


def control_step(
    positions: np.ndarray,
    centroids_: np.ndarray,
    kappa: float,
    dt: float,
    inner_steps: int,
    grid: DomainGrid,
    density: Density | None = None,
) -> np.ndarray:
    """Euler-integrate ``x' = kappa (c - x)`` for ``inner_steps`` steps of length ``dt``.

    When ``density`` is given, centroids are recomputed on the current
    positions before every inner step after the first.  Results are clamped
    to the domain.
    """
    gain = kappa * dt
    if not (kappa > 0 and dt > 0):
        raise ValueError("kappa and dt must be positive")
    if gain > 1 + 1e-12:
        raise ValueError(f"kappa*dt={gain} > 1 overshoots the centroid")
    if inner_steps < 1:
        raise ValueError("inner_steps must be >= 1")
    x = np.asarray(positions, dtype=float).reshape(-1, 2)
    c = np.asarray(centroids_, dtype=float).reshape(-1, 2)
    for k in range(inner_steps):
        if k > 0 and density is not None:
            c, _ = centroids(assign_voronoi(grid, x), density, grid)
        x = grid.clamp(x + gain * (c - x))
    return x


def lloyd(
    grid: DomainGrid,
    density: Density,
    positions: np.ndarray,
    tol: float | None = None,
    max_iter: int = 1000,
) -> tuple[np.ndarray, int]:
    """Iterate unit-gain Lloyd steps until the largest move is below ``tol`` (default ``h/10``)."""
    f = grid.values(density)
    tol = grid.h / 10 if tol is None else tol
    x = np.asarray(positions, dtype=float).reshape(-1, 2).copy()
    for it in range(1, max_iter + 1):
        c, _ = centroids(assign_voronoi(grid, x), f, grid)
        c = grid.clamp(c)
        move = np.max(np.hypot(*(c - x).T))
        x = c
        if move < tol:
            return x, it
    return x, max_iter
