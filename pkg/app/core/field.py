"""Rink geometry, named zones and the discretization grid.

All coordinates are meters on the left-hand defensive half of a 61 x 30 m rink, origin in
the lower-left corner. Zone tests accept single points or arrays of shape (..., 2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

FloatArray = NDArray[np.float64]
# A point on the rink is a float array of shape (2,): [x, y] in meters.
Point2 = FloatArray


class FieldError(ValueError):
    pass


@dataclass(frozen=True)
class FieldSpec:
    width: float = 61.0
    height: float = 30.0
    goal: Tuple[float, float] = (6.0, 15.0)
    active_x_max: float = 30.0
    speed_cap: float = 3.0

    @property
    def goal_point(self) -> Point2:
        return np.array(self.goal, dtype=float)

    def contains(self, points: ArrayLike) -> NDArray[np.bool_]:
        pts = np.asarray(points, dtype=float)
        return (
            (pts[..., 0] >= 0.0)
            & (pts[..., 0] <= self.width)
            & (pts[..., 1] >= 0.0)
            & (pts[..., 1] <= self.height)
        )


RINK = FieldSpec()

# house area: y >= -x + 20, y <= x + 10, (x - 5)^2 + (y - 15)^2 <= 225
HOUSE_CIRCLE_CENTER = (5.0, 15.0)
HOUSE_CIRCLE_RADIUS = 15.0
HOUSE_APEX = (5.0, 15.0)

LOW_GAIN_X = (14.945, 21.960)
LOW_GAIN_Y = (10.0, 20.0)


def as_point(p: ArrayLike) -> Point2:
    """Coerce to a finite (2,) float array, rejecting anything else."""
    arr = np.asarray(p, dtype=float)
    if arr.shape != (2,):
        raise FieldError(f"expected a 2-D point, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise FieldError(f"non-finite point {arr.tolist()}")
    return arr


def as_points(points: ArrayLike) -> FloatArray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] != 2:
        raise FieldError(f"expected points of shape (..., 2), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise FieldError("non-finite coordinates in point array")
    return arr


def house_mask(x: ArrayLike, y: ArrayLike) -> NDArray[np.bool_]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    cx, cy = HOUSE_CIRCLE_CENTER
    return (
        (y >= -x + 20.0)
        & (y <= x + 10.0)
        & ((x - cx) ** 2 + (y - cy) ** 2 <= HOUSE_CIRCLE_RADIUS**2)
    )


def low_gain_mask(x: ArrayLike, y: ArrayLike) -> NDArray[np.bool_]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return (
        (x >= LOW_GAIN_X[0]) & (x <= LOW_GAIN_X[1]) & (y >= LOW_GAIN_Y[0]) & (y <= LOW_GAIN_Y[1])
    )


def in_house_area(p: ArrayLike) -> bool:
    q = as_point(p)
    return bool(house_mask(q[0], q[1]))


def in_low_gain_zone(p: ArrayLike) -> bool:
    q = as_point(p)
    return bool(low_gain_mask(q[0], q[1]))


def house_boundary(n_arc: int = 64) -> FloatArray:
    """Closed polygon of the house area, starting and ending at the apex (5, 15)."""
    cx, cy = HOUSE_CIRCLE_CENTER
    # both lines meet the circle at 45 degrees either side of the center
    angles = np.linspace(-math.pi / 4, math.pi / 4, n_arc)
    arc = np.column_stack(
        [cx + HOUSE_CIRCLE_RADIUS * np.cos(angles), cy + HOUSE_CIRCLE_RADIUS * np.sin(angles)]
    )
    apex = np.array([HOUSE_APEX])
    return np.vstack([apex, arc, apex])


def clamp_to_field(points: ArrayLike, spec: FieldSpec = RINK) -> FloatArray:
    pts = np.array(points, dtype=float)
    pts[..., 0] = np.clip(pts[..., 0], 0.0, spec.width)
    pts[..., 1] = np.clip(pts[..., 1], 0.0, spec.height)
    return pts


@dataclass(frozen=True)
class Grid:
    """Uniform cell-center grid over the field.

    Cells tile the field exactly, so the actual spacing (dx, dy) is at most the requested
    resolution. Flat cell index k = j * nx + i: rows of constant y, x increasing inside a
    row. Arrays of per-cell values use shape (ny, nx) so that ``values.ravel()`` follows
    the same order.
    """

    spec: FieldSpec
    resolution: float
    nx: int
    ny: int

    @property
    def dx(self) -> float:
        return self.spec.width / self.nx

    @property
    def dy(self) -> float:
        return self.spec.height / self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def shape(self) -> Tuple[int, int]:
        return self.ny, self.nx

    @cached_property
    def xs(self) -> FloatArray:
        return (np.arange(self.nx) + 0.5) * self.dx

    @cached_property
    def ys(self) -> FloatArray:
        return (np.arange(self.ny) + 0.5) * self.dy

    @cached_property
    def mesh(self) -> Tuple[FloatArray, FloatArray]:
        gx, gy = np.meshgrid(self.xs, self.ys)
        return gx, gy

    @cached_property
    def points(self) -> FloatArray:
        gx, gy = self.mesh
        return np.column_stack([gx.ravel(), gy.ravel()])

    def center(self, i: int, j: int) -> Point2:
        if not (0 <= i < self.nx and 0 <= j < self.ny):
            raise FieldError(f"cell ({i}, {j}) outside a {self.nx}x{self.ny} grid")
        return np.array([self.xs[i], self.ys[j]])

    def index_of(self, p: ArrayLike) -> Tuple[int, int]:
        q = as_point(p)
        if not self.spec.contains(q):
            raise FieldError(f"point {q.tolist()} outside the field")
        i = min(int(q[0] // self.dx), self.nx - 1)
        j = min(int(q[1] // self.dy), self.ny - 1)
        return i, j

    def flat_index(self, i: int, j: int) -> int:
        return j * self.nx + i


def make_grid(spec: FieldSpec = RINK, resolution: float = 0.25) -> Grid:
    if not math.isfinite(resolution) or resolution <= 0 or resolution > 1:
        raise FieldError(f"grid resolution must lie in (0, 1] m, got {resolution}")
    nx = math.ceil(spec.width / resolution - 1e-9)
    ny = math.ceil(spec.height / resolution - 1e-9)
    return Grid(spec=spec, resolution=float(resolution), nx=nx, ny=ny)
