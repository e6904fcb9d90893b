"""Composite weight field built from the offensive team's state.

Every attacker and the goal contribute one unnormalized Gaussian bump (peak 1). The bumps
then pass through the gain stages in a fixed order: distance gain (players only), house
gain, puck-holder priority, low-gain zone (non-holders only) and the right-half mask.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field

from app.core.field import (
    RINK,
    FieldSpec,
    FloatArray,
    Grid,
    Point2,
    as_point,
    as_points,
    house_mask,
    low_gain_mask,
    make_grid,
)

logger = logging.getLogger(__name__)

# puck-holder priority applies once the holder is this close to the end boards
HOLDER_PRIORITY_X = 10.0
HOLDER_SPLIT_Y = 15.0

# columns per evaluation block; fixed so the block layout never depends on the worker count
_BLOCK_COLUMNS = 32


class DensityError(ValueError):
    pass


class DensityParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    sigma: float = Field(15.0, gt=0)
    p_gain: float = Field(2.0, gt=0)
    goal_house_factor: float = Field(1.5, ge=0)
    distance_norm: float = Field(25.0, gt=0)
    low_gain: float = Field(0.1, ge=0)
    holder_near_gain: float = Field(0.1, ge=0)
    holder_far_gain: float = Field(0.05, ge=0)


@dataclass(frozen=True)
class OffensiveFrame:
    t: float
    ids: Tuple[int, ...]
    positions: FloatArray
    velocities: FloatArray
    puck_holder: int
    spec: FieldSpec = field(default=RINK, compare=False)

    def __post_init__(self) -> None:
        ids = tuple(int(i) for i in self.ids)
        positions = as_points(self.positions).reshape(-1, 2)
        velocities = as_points(self.velocities).reshape(-1, 2)
        if not ids:
            raise DensityError("frame has no offensive players")
        if len(set(ids)) != len(ids):
            raise DensityError(f"duplicate player ids in frame t={self.t}: {ids}")
        if positions.shape[0] != len(ids) or velocities.shape[0] != len(ids):
            raise DensityError("ids, positions and velocities disagree in length")
        if self.puck_holder not in ids:
            raise DensityError(f"puck holder {self.puck_holder} is not among players {ids}")
        if not np.all(self.spec.contains(positions)):
            raise DensityError(f"offensive position outside the field at t={self.t}")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "velocities", velocities)

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def holder_index(self) -> int:
        return self.ids.index(self.puck_holder)

    @property
    def holder_position(self) -> Point2:
        return self.positions[self.holder_index]

    def index_of(self, player_id: int) -> int:
        return self.ids.index(player_id)


@dataclass(frozen=True)
class WeightField:
    grid: Grid
    values: FloatArray  # shape (ny, nx)

    @property
    def flat(self) -> FloatArray:
        return self.values.ravel()

    def at(self, p: ArrayLike) -> float:
        i, j = self.grid.index_of(p)
        return float(self.values[j, i])

    def scaled(self, c: float) -> "WeightField":
        return WeightField(grid=self.grid, values=self.values * c)


def weight_center(P_i: ArrayLike, V_i: ArrayLike, goal: ArrayLike) -> Point2:
    p = as_point(P_i)
    v = as_point(V_i)
    to_goal = as_point(goal) - p
    dist = float(np.hypot(to_goal[0], to_goal[1]))
    if dist < 1e-9:
        return p + v
    return p + to_goal / dist + v


def gaussian_bump(q: ArrayLike, center: ArrayLike, sigma: float) -> FloatArray | float:
    if sigma <= 0:
        raise DensityError(f"sigma must be positive, got {sigma}")
    diff = np.asarray(q, dtype=float) - as_point(center)
    value = np.exp(-np.sum(diff * diff, axis=-1) / (2.0 * sigma))
    return float(value) if np.ndim(value) == 0 else value


def distance_gain(q: ArrayLike, goal: ArrayLike, norm: float) -> FloatArray | float:
    if norm <= 0:
        raise DensityError(f"distance norm must be positive, got {norm}")
    diff = as_point(goal) - np.asarray(q, dtype=float)
    dist = np.hypot(diff[..., 0], diff[..., 1])
    value = np.maximum(0.0, (norm - dist) / norm)
    return float(value) if np.ndim(value) == 0 else value


def _bump_xy(x: FloatArray, y: FloatArray, center: Point2, sigma: float) -> FloatArray:
    return np.exp(-((x - center[0]) ** 2 + (y - center[1]) ** 2) / (2.0 * sigma))


def staged_weights(
    x: ArrayLike, y: ArrayLike, frame: OffensiveFrame, params: DensityParams
) -> FloatArray:
    """Per-source weights after every gain stage.

    Returns an array of shape (n + 1, *x.shape): one layer per attacker in frame order,
    the goal layer last.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    spec = frame.spec
    goal = spec.goal_point
    holder = frame.holder_index
    hx, hy = frame.holder_position

    in_house = house_mask(x, y)
    dgain = np.maximum(0.0, (params.distance_norm - np.hypot(goal[0] - x, goal[1] - y)) / params.distance_norm)
    house_gain = np.where(in_house, params.p_gain, 1.0)
    active = x <= spec.active_x_max

    # holder priority factors; identity when the holder is beyond x = 10
    other_gain = np.ones_like(x)
    goal_keep = np.ones(x.shape, dtype=bool)
    if hx <= HOLDER_PRIORITY_X:
        if hy <= HOLDER_SPLIT_Y:
            other_gain = np.where(y < HOLDER_SPLIT_Y, params.holder_near_gain, params.holder_far_gain)
            goal_keep = (y < HOLDER_SPLIT_Y) & (x < HOLDER_PRIORITY_X)
        else:
            other_gain = np.where(y >= HOLDER_SPLIT_Y, params.holder_near_gain, params.holder_far_gain)
            goal_keep = (y > HOLDER_SPLIT_Y) & (x < HOLDER_PRIORITY_X)
    zone_gain = np.where(low_gain_mask(x, y), params.low_gain, 1.0)

    layers = np.empty((frame.n + 1, *x.shape))
    for i in range(frame.n):
        center = weight_center(frame.positions[i], frame.velocities[i], goal)
        w = _bump_xy(x, y, center, params.sigma) * dgain
        w = w * house_gain
        if i != holder:
            w = w * other_gain
            w = w * zone_gain
        layers[i] = np.where(active, w, 0.0)

    w_goal = _bump_xy(x, y, goal, params.sigma)
    w_goal = np.where(in_house, w_goal * params.p_gain * params.goal_house_factor, 0.0)
    w_goal = np.where(goal_keep, w_goal, 0.0)
    layers[frame.n] = np.where(active, w_goal, 0.0)
    return layers


def weight_at(points: ArrayLike, frame: OffensiveFrame, params: DensityParams) -> FloatArray | float:
    pts = as_points(points)
    layers = staged_weights(pts[..., 0], pts[..., 1], frame, params)
    phi = layers[: frame.n].sum(axis=0) + layers[frame.n]
    return float(phi) if np.ndim(phi) == 0 else phi


def _column_blocks(grid: Grid) -> List[slice]:
    return [slice(s, min(s + _BLOCK_COLUMNS, grid.nx)) for s in range(0, grid.nx, _BLOCK_COLUMNS)]


def build_weight_field(
    frame: OffensiveFrame,
    params: DensityParams | None = None,
    grid: Grid | None = None,
    *,
    workers: int = 1,
) -> WeightField:
    params = params or DensityParams()
    grid = grid or make_grid(frame.spec)
    if frame.puck_holder not in frame.ids:
        raise DensityError(f"puck holder {frame.puck_holder} is not among players {frame.ids}")

    gx, gy = grid.mesh
    blocks = _column_blocks(grid)

    def evaluate(cols: slice) -> FloatArray:
        return weight_at(np.stack([gx[:, cols], gy[:, cols]], axis=-1), frame, params)

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts: Sequence[FloatArray] = list(pool.map(evaluate, blocks))
    else:
        parts = [evaluate(cols) for cols in blocks]
    values = np.concatenate(parts, axis=1)
    logger.debug("weight field t=%.3f total=%.4f", frame.t, float(values.sum()))
    return WeightField(grid=grid, values=values)
