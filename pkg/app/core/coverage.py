"""Voronoi partition, mass and centroid integrals, nominal inputs and the coverage cost.

Defenders are passed as an (m, 2) array of positions; row i is defender index i. All
integrals use midpoint quadrature on the weight field's grid.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from app.core.density import WeightField
from app.core.field import FloatArray, Grid, Point2, as_points


class DegenerateCellError(ArithmeticError):
    pass


@dataclass(frozen=True)
class VoronoiPartition:
    grid: Grid
    owner: np.ndarray  # shape (ny, nx), defender index per cell
    n_defenders: int

    @property
    def flat_owner(self) -> np.ndarray:
        return self.owner.ravel()

    def cell_count(self, i: int) -> int:
        return int(np.count_nonzero(self.owner == i))


def _defender_array(defenders: ArrayLike) -> FloatArray:
    pts = as_points(defenders).reshape(-1, 2)
    if pts.shape[0] == 0:
        raise ValueError("at least one defender is required")
    return pts


def _squared_distances(grid: Grid, defenders: FloatArray) -> FloatArray:
    pts = grid.points
    return (pts[:, None, 0] - defenders[None, :, 0]) ** 2 + (pts[:, None, 1] - defenders[None, :, 1]) ** 2


def assign_voronoi(defenders: ArrayLike, grid: Grid) -> VoronoiPartition:
    pts = _defender_array(defenders)
    # argmin returns the first minimum, which is the lowest-index tie-break
    owner = np.argmin(_squared_distances(grid, pts), axis=1)
    return VoronoiPartition(grid=grid, owner=owner.reshape(grid.shape), n_defenders=pts.shape[0])


def _check_grid(partition: VoronoiPartition, phi: WeightField) -> None:
    if partition.grid != phi.grid:
        raise ValueError("partition and weight field use different grids")


def cell_masses(partition: VoronoiPartition, phi: WeightField) -> FloatArray:
    _check_grid(partition, phi)
    sums = np.bincount(partition.flat_owner, weights=phi.flat, minlength=partition.n_defenders)
    return sums * partition.grid.cell_area


def cell_mass(partition: VoronoiPartition, phi: WeightField, i: int) -> float:
    return float(cell_masses(partition, phi)[i])


def _moments(partition: VoronoiPartition, phi: WeightField) -> FloatArray:
    pts = partition.grid.points
    mx = np.bincount(partition.flat_owner, weights=phi.flat * pts[:, 0], minlength=partition.n_defenders)
    my = np.bincount(partition.flat_owner, weights=phi.flat * pts[:, 1], minlength=partition.n_defenders)
    return np.column_stack([mx, my]) * partition.grid.cell_area


def cell_centroid(partition: VoronoiPartition, phi: WeightField, i: int) -> Point2:
    mass = cell_mass(partition, phi, i)
    if mass <= 0.0:
        raise DegenerateCellError(f"defender {i} owns no weight")
    return _moments(partition, phi)[i] / mass


def cell_centroids(partition: VoronoiPartition, phi: WeightField, defenders: ArrayLike) -> FloatArray:
    """Centroids for every defender; a zero-mass cell falls back to the defender's own position."""
    pts = _defender_array(defenders)
    masses = cell_masses(partition, phi)
    moments = _moments(partition, phi)
    centroids = pts.copy()
    ok = masses > 0.0
    centroids[ok] = moments[ok] / masses[ok, None]
    return centroids


def nominal_input(position: ArrayLike, centroid: ArrayLike, k: float = 1.0) -> FloatArray:
    if k <= 0:
        raise ValueError(f"gain k must be positive, got {k}")
    return -k * (np.asarray(position, dtype=float) - np.asarray(centroid, dtype=float))


def coverage_cost(
    defenders: ArrayLike, phi: WeightField, partition: VoronoiPartition | None = None
) -> float:
    """Locational cost J. With ``partition`` given, cells stay fixed instead of being re-assigned."""
    pts = _defender_array(defenders)
    partition = partition or assign_voronoi(pts, phi.grid)
    _check_grid(partition, phi)
    grid_pts = phi.grid.points
    owner = partition.flat_owner
    d2 = (grid_pts[:, 0] - pts[owner, 0]) ** 2 + (grid_pts[:, 1] - pts[owner, 1]) ** 2
    return float(np.sum(d2 * phi.flat) * phi.grid.cell_area)


def coverage_gradient(defenders: ArrayLike, phi: WeightField, partition: VoronoiPartition | None = None) -> FloatArray:
    pts = _defender_array(defenders)
    partition = partition or assign_voronoi(pts, phi.grid)
    masses = cell_masses(partition, phi)
    centroids = cell_centroids(partition, phi, pts)
    return 2.0 * masses[:, None] * (pts - centroids)
