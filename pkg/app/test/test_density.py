from __future__ import annotations

import math

import numpy as np
import pytest

from app.core.coverage import assign_voronoi, cell_centroids
from app.core.density import (
    DensityError,
    DensityParams,
    OffensiveFrame,
    build_weight_field,
    distance_gain,
    gaussian_bump,
    staged_weights,
    weight_at,
    weight_center,
)
from app.core.field import make_grid


def _frame(positions, holder_id, velocities=None, t=0.0) -> OffensiveFrame:
    positions = np.asarray(positions, dtype=float)
    ids = tuple(range(1, len(positions) + 1))
    if velocities is None:
        velocities = np.zeros_like(positions)
    return OffensiveFrame(t=t, ids=ids, positions=positions, velocities=velocities, puck_holder=holder_id)


def _reference_phi(x: float, y: float, frame: OffensiveFrame, p: float) -> float:
    """Stage-by-stage composition written out one point at a time."""
    gx, gy = 6.0, 15.0
    in_house = y >= -x + 20 and y <= x + 10 and (x - 5) ** 2 + (y - 15) ** 2 <= 225
    in_zone = 14.945 <= x <= 21.960 and 10 <= y <= 20
    hx, hy = frame.holder_position

    total = 0.0
    for i in range(frame.n):
        px, py = frame.positions[i]
        vx, vy = frame.velocities[i]
        dist = math.hypot(gx - px, gy - py)
        cx, cy = (px + vx, py + vy) if dist < 1e-9 else (px + (gx - px) / dist + vx, py + (gy - py) / dist + vy)
        w = math.exp(-((x - cx) ** 2 + (y - cy) ** 2) / 30.0)
        w *= max(0.0, (25.0 - math.hypot(gx - x, gy - y)) / 25.0)
        if in_house:
            w *= p
        if i != frame.holder_index:
            if hx <= 10:
                if hy <= 15:
                    w *= 0.1 if y < 15 else 0.05
                else:
                    w *= 0.1 if y >= 15 else 0.05
            if in_zone:
                w *= 0.1
        total += w

    w_goal = math.exp(-((x - gx) ** 2 + (y - gy) ** 2) / 30.0)
    w_goal = w_goal * p * 1.5 if in_house else 0.0
    if hx <= 10:
        keep = (y < 15 and x < 10) if hy <= 15 else (y > 15 and x < 10)
        if not keep:
            w_goal = 0.0
    total += w_goal
    return 0.0 if x > 30 else total


def test_weight_center_examples() -> None:
    goal = (6.0, 15.0)
    assert np.allclose(weight_center((16.0, 15.0), (0.0, 0.0), goal), (15.0, 15.0))
    assert np.allclose(weight_center((16.0, 15.0), (1.0, 0.0), goal), (16.0, 15.0))
    assert np.allclose(weight_center((6.0, 15.0), (0.0, 0.0), goal), (6.0, 15.0))


def test_gaussian_bump_values() -> None:
    assert gaussian_bump((3.0, 4.0), (3.0, 4.0), 15.0) == 1.0
    assert gaussian_bump((0.0, math.sqrt(30.0)), (0.0, 0.0), 15.0) == pytest.approx(math.exp(-1.0), rel=1e-12)
    far = gaussian_bump(np.array([[0.0, 10.0], [0.0, 20.0], [0.0, 40.0]]), (0.0, 0.0), 15.0)
    assert np.all(np.diff(far) < 0)
    with pytest.raises(DensityError):
        gaussian_bump((0.0, 0.0), (0.0, 0.0), 0.0)


@pytest.mark.parametrize("q,expected", [((6.0, 15.0), 1.0), ((18.5, 15.0), 0.5), ((36.0, 15.0), 0.0)])
def test_distance_gain(q, expected: float) -> None:
    assert distance_gain(q, (6.0, 15.0), 25.0) == pytest.approx(expected)


def test_hand_composed_goal_cell() -> None:
    frame = _frame([(16.0, 15.0)], holder_id=1)
    value = weight_at((6.0, 15.0), frame, DensityParams(p_gain=2.0))
    assert value == pytest.approx(3.0 + 2.0 * math.exp(-2.7), abs=1e-12)


def test_field_matches_pointwise_reference() -> None:
    rng = np.random.default_rng(11)
    grid = make_grid(resolution=1.0)
    for holder_pos in [(8.0, 10.0), (7.0, 22.0), (19.0, 15.0)]:
        others = rng.uniform([4.0, 2.0], [28.0, 28.0], size=(3, 2))
        positions = np.vstack([holder_pos, others])
        velocities = rng.normal(scale=1.5, size=positions.shape)
        frame = _frame(positions, holder_id=1, velocities=velocities)
        for p in (0.5, 2.0, 10.0):
            phi = build_weight_field(frame, DensityParams(p_gain=p), grid)
            expected = np.array([_reference_phi(x, y, frame, p) for x, y in grid.points])
            assert np.allclose(phi.flat, expected, rtol=0.0, atol=1e-12)


def test_field_is_nonnegative_and_masked_right_of_center() -> None:
    frame = _frame([(20.0, 8.0), (12.0, 20.0), (28.0, 15.0)], holder_id=1)
    phi = build_weight_field(frame, DensityParams(), make_grid(resolution=0.5))
    gx, _ = phi.grid.mesh
    assert np.all(phi.values >= 0.0)
    assert np.all(phi.values[gx > 30.0] == 0.0)
    assert weight_at((35.0, 15.0), frame, DensityParams()) == 0.0


def test_holder_priority_scaling_below_center_line() -> None:
    frame = _frame([(8.0, 10.0), (20.0, 20.0)], holder_id=1)
    params = DensityParams()
    pts = np.array([[25.0, 20.0], [25.0, 10.0]])
    layers = staged_weights(pts[:, 0], pts[:, 1], frame, params)
    center = weight_center(frame.positions[1], frame.velocities[1], (6.0, 15.0))
    raw = gaussian_bump(pts, center, params.sigma) * distance_gain(pts, (6.0, 15.0), params.distance_norm)
    assert layers[1, 0] == pytest.approx(raw[0] * 0.05, rel=1e-12)
    assert layers[1, 1] == pytest.approx(raw[1] * 0.1, rel=1e-12)
    goal_layer = staged_weights(np.array([7.0]), np.array([16.0]), frame, params)[-1]
    assert goal_layer[0] == 0.0


def test_holder_beyond_priority_line_leaves_weights_unscaled() -> None:
    params = DensityParams()
    near = _frame([(12.0, 10.0), (20.0, 20.0)], holder_id=1)
    pts = np.array([[25.0, 20.0]])
    layers = staged_weights(pts[:, 0], pts[:, 1], near, params)
    center = weight_center(near.positions[1], near.velocities[1], (6.0, 15.0))
    raw = gaussian_bump(pts, center, params.sigma) * distance_gain(pts, (6.0, 15.0), params.distance_norm)
    assert layers[1, 0] == pytest.approx(raw[0], rel=1e-12)


def test_low_gain_zone_spares_the_holder() -> None:
    params = DensityParams(p_gain=1.0)
    frame = _frame([(18.0, 15.0), (18.0, 14.0)], holder_id=1)
    layers = staged_weights(np.array([18.0]), np.array([15.0]), frame, params)
    holder_center = weight_center(frame.positions[0], frame.velocities[0], (6.0, 15.0))
    other_center = weight_center(frame.positions[1], frame.velocities[1], (6.0, 15.0))
    gain = distance_gain((18.0, 15.0), (6.0, 15.0), 25.0)
    assert layers[0, 0] == pytest.approx(gaussian_bump((18.0, 15.0), holder_center, 15.0) * gain)
    assert layers[1, 0] == pytest.approx(gaussian_bump((18.0, 15.0), other_center, 15.0) * gain * 0.1)


def test_worker_count_does_not_change_the_field() -> None:
    frame = _frame([(20.0, 8.0), (12.0, 20.0), (9.0, 12.0)], holder_id=3)
    grid = make_grid(resolution=0.25)
    single = build_weight_field(frame, DensityParams(), grid, workers=1)
    threaded = build_weight_field(frame, DensityParams(), grid, workers=4)
    assert np.array_equal(single.values, threaded.values)


def test_scaling_the_field_keeps_cells_and_centroids() -> None:
    frame = _frame([(20.0, 8.0), (12.0, 20.0)], holder_id=1)
    grid = make_grid(resolution=1.0)
    phi = build_weight_field(frame, DensityParams(), grid)
    defenders = np.array([(10.0, 7.0), (10.0, 11.0), (10.0, 15.0), (10.0, 19.0), (10.0, 23.0)])
    partition = assign_voronoi(defenders, grid)
    base = cell_centroids(partition, phi, defenders)
    scaled = cell_centroids(partition, phi.scaled(7.5), defenders)
    assert np.allclose(base, scaled, rtol=0.0, atol=1e-12)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"puck_holder": 9},
        {"ids": (1, 1)},
        {"positions": [(10.0, 10.0), (70.0, 10.0)]},
    ],
)
def test_offensive_frame_validation(kwargs) -> None:
    values = {
        "t": 0.0,
        "ids": (1, 2),
        "positions": [(10.0, 10.0), (20.0, 10.0)],
        "velocities": [(0.0, 0.0), (0.0, 0.0)],
        "puck_holder": 1,
    }
    values.update(kwargs)
    with pytest.raises(DensityError):
        OffensiveFrame(**values)
