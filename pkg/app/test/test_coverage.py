from __future__ import annotations

import numpy as np
import pytest

from app.core.coverage import (
    DegenerateCellError,
    assign_voronoi,
    cell_centroid,
    cell_centroids,
    cell_mass,
    cell_masses,
    coverage_cost,
    coverage_gradient,
    nominal_input,
)
from app.core.density import WeightField
from app.core.engine import clamp_speed
from app.core.field import make_grid


def _uniform_left_square(resolution: float = 0.25) -> WeightField:
    """phi = 1 on [0, 30] x [0, 30], 0 elsewhere."""
    grid = make_grid(resolution=resolution)
    gx, _ = grid.mesh
    return WeightField(grid=grid, values=(gx < 30.0).astype(float))


def _bump_field(center, sigma: float, resolution: float = 0.25) -> WeightField:
    grid = make_grid(resolution=resolution)
    gx, gy = grid.mesh
    values = np.exp(-((gx - center[0]) ** 2 + (gy - center[1]) ** 2) / (2.0 * sigma))
    return WeightField(grid=grid, values=values)


def test_single_defender_owns_everything() -> None:
    grid = make_grid(resolution=1.0)
    partition = assign_voronoi([(40.0, 3.0)], grid)
    assert partition.cell_count(0) == grid.size


def test_bisector_split() -> None:
    grid = make_grid(resolution=0.5)
    partition = assign_voronoi([(10.0, 15.0), (20.0, 15.0)], grid)
    gx, _ = grid.mesh
    assert np.all(partition.owner[gx < 15.0] == 0)
    assert np.all(partition.owner[gx > 15.0] == 1)


def test_ties_go_to_the_lower_index() -> None:
    grid = make_grid(resolution=1.0)
    partition = assign_voronoi([(12.0, 12.0), (12.0, 12.0)], grid)
    assert partition.cell_count(0) == grid.size
    assert partition.cell_count(1) == 0


def test_partition_is_exact_on_random_configurations() -> None:
    rng = np.random.default_rng(3)
    grid = make_grid(resolution=1.0)
    for _ in range(20):
        defenders = rng.uniform([0.0, 0.0], [61.0, 30.0], size=(5, 2))
        partition = assign_voronoi(defenders, grid)
        pts = grid.points
        d2 = ((pts[:, None, :] - defenders[None, :, :]) ** 2).sum(axis=-1)
        owned = d2[np.arange(len(pts)), partition.flat_owner]
        assert np.all(owned[:, None] <= d2)


def test_uniform_masses() -> None:
    phi = _uniform_left_square()
    one = assign_voronoi([(15.0, 15.0)], phi.grid)
    assert cell_mass(one, phi, 0) == pytest.approx(900.0)
    two = assign_voronoi([(10.0, 15.0), (20.0, 15.0)], phi.grid)
    assert cell_mass(two, phi, 0) == pytest.approx(cell_mass(two, phi, 1))
    zero = WeightField(grid=phi.grid, values=np.zeros(phi.grid.shape))
    assert cell_mass(one, zero, 0) == 0.0


def test_uniform_centroids_against_brute_force_and_closed_form() -> None:
    phi = _uniform_left_square()
    res = phi.grid.resolution
    one = assign_voronoi([(15.0, 15.0)], phi.grid)
    assert np.allclose(cell_centroid(one, phi, 0), (15.0, 15.0), atol=res)

    defenders = np.array([(10.0, 15.0), (20.0, 15.0)])
    two = assign_voronoi(defenders, phi.grid)
    centroids = cell_centroids(two, phi, defenders)

    pts = phi.grid.points
    weights = phi.flat
    for i in range(2):
        total = 0.0
        sx = sy = 0.0
        for (x, y), w, owner in zip(pts, weights, two.flat_owner):
            if owner == i and w > 0.0:
                total += w
                sx += w * x
                sy += w * y
        assert np.allclose(centroids[i], (sx / total, sy / total), rtol=0.0, atol=1e-9)

    assert np.allclose(centroids[0], (7.5, 15.0), atol=2 * res)
    assert np.allclose(centroids[1], (22.5, 15.0), atol=2 * res)


def test_centroid_tracks_narrow_bump() -> None:
    phi = _bump_field((12.3, 17.6), sigma=0.1)
    defenders = np.array([(10.0, 15.0), (40.0, 15.0)])
    partition = assign_voronoi(defenders, phi.grid)
    assert np.allclose(cell_centroid(partition, phi, 0), (12.3, 17.6), atol=2 * phi.grid.resolution)


def test_zero_mass_cell_is_degenerate() -> None:
    phi = _uniform_left_square()
    defenders = np.array([(10.0, 15.0), (55.0, 15.0)])
    partition = assign_voronoi(defenders, phi.grid)
    with pytest.raises(DegenerateCellError):
        cell_centroid(partition, phi, 1)
    centroids = cell_centroids(partition, phi, defenders)
    assert np.array_equal(centroids[1], defenders[1])


def test_nominal_input() -> None:
    assert np.array_equal(nominal_input((10.0, 15.0), (10.0, 15.0)), (0.0, 0.0))
    assert np.allclose(nominal_input((10.0, 15.0), (12.0, 15.0), k=1.0), (2.0, 0.0))
    assert np.allclose(nominal_input((10.0, 15.0), (12.0, 16.0), k=2.0), 2.0 * nominal_input((10.0, 15.0), (12.0, 16.0)))
    with pytest.raises(ValueError):
        nominal_input((0.0, 0.0), (1.0, 1.0), k=0.0)


def test_coverage_cost_closed_form() -> None:
    phi = _uniform_left_square()
    assert coverage_cost([(15.0, 15.0)], phi) == pytest.approx(135000.0, rel=0.01)
    zero = WeightField(grid=phi.grid, values=np.zeros(phi.grid.shape))
    assert coverage_cost([(15.0, 15.0)], zero) == 0.0


def test_cost_scales_with_the_field() -> None:
    phi = _bump_field((14.0, 12.0), sigma=20.0, resolution=1.0)
    defenders = [(10.0, 7.0), (10.0, 11.0), (10.0, 15.0), (10.0, 19.0), (10.0, 23.0)]
    assert coverage_cost(defenders, phi.scaled(3.0)) == pytest.approx(3.0 * coverage_cost(defenders, phi), rel=1e-12)


def test_gradient_matches_finite_differences_with_fixed_cells() -> None:
    phi = _bump_field((14.0, 12.0), sigma=20.0, resolution=1.0)
    defenders = np.array([(10.0, 7.0), (12.0, 14.0), (20.0, 22.0)])
    partition = assign_voronoi(defenders, phi.grid)
    grad = coverage_gradient(defenders, phi, partition)
    eps = 1e-5
    for i in range(3):
        for c in range(2):
            up = defenders.copy()
            down = defenders.copy()
            up[i, c] += eps
            down[i, c] -= eps
            fd = (coverage_cost(up, phi, partition) - coverage_cost(down, phi, partition)) / (2 * eps)
            assert fd == pytest.approx(grad[i, c], rel=1e-5, abs=1e-6)


def test_moving_onto_centroids_never_raises_cost() -> None:
    rng = np.random.default_rng(5)
    phi = _bump_field((12.0, 15.0), sigma=40.0, resolution=1.0)
    for _ in range(25):
        defenders = rng.uniform([0.0, 0.0], [30.0, 30.0], size=(5, 2))
        partition = assign_voronoi(defenders, phi.grid)
        moved = cell_centroids(partition, phi, defenders)
        assert coverage_cost(moved, phi) <= coverage_cost(defenders, phi) * (1 + 1e-12)


def test_lloyd_descent_on_random_static_configurations() -> None:
    rng = np.random.default_rng(2024)
    grid = make_grid(resolution=1.0)
    gx, gy = grid.mesh
    dt = 0.1
    for _ in range(100):
        center = rng.uniform([4.0, 4.0], [28.0, 26.0])
        values = np.exp(-((gx - center[0]) ** 2 + (gy - center[1]) ** 2) / 30.0) * (gx <= 30.0)
        phi = WeightField(grid=grid, values=values)
        defenders = rng.uniform([0.0, 0.0], [30.0, 30.0], size=(5, 2))
        previous = coverage_cost(defenders, phi)
        for _ in range(200):
            partition = assign_voronoi(defenders, grid)
            u = nominal_input(defenders, cell_centroids(partition, phi, defenders))
            u, _ = clamp_speed(u, 3.0)
            defenders = defenders + u * dt
            cost = coverage_cost(defenders, phi)
            assert cost <= previous + 1e-6 * previous
            previous = cost


def test_centroids_stay_within_their_cells() -> None:
    rng = np.random.default_rng(8)
    grid = make_grid(resolution=0.5)
    gx, gy = grid.mesh
    for _ in range(20):
        values = np.zeros(grid.shape)
        for cx, cy, sigma in zip(rng.uniform(0.0, 61.0, 3), rng.uniform(0.0, 30.0, 3), rng.uniform(0.5, 20.0, 3)):
            values += np.exp(-((gx - cx) ** 2 + (gy - cy) ** 2) / (2.0 * sigma))
        phi = WeightField(grid=grid, values=values)
        defenders = rng.uniform([0.0, 0.0], [61.0, 30.0], size=(5, 2))
        partition = assign_voronoi(defenders, grid)
        centroids = cell_centroids(partition, phi, defenders)
        masses = cell_masses(partition, phi)
        for i in range(5):
            # bumps far from a cell underflow toward zero mass
            if masses[i] < 1e-12:
                continue
            owned = grid.points[partition.flat_owner == i]
            lo, hi = owned.min(axis=0), owned.max(axis=0)
            assert np.all(centroids[i] >= lo - 1e-9)
            assert np.all(centroids[i] <= hi + 1e-9)
