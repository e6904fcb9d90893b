from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Iterable, Tuple

import matplotlib

matplotlib.use("Agg")

import numpy as np  # noqa: E402
from matplotlib.collections import LineCollection  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402
from matplotlib.patches import Ellipse, Polygon, Rectangle  # noqa: E402
from numpy.typing import ArrayLike  # noqa: E402

from app.core.cbf import CbfParams, DegenerateLaneError, ellipse_from_players  # noqa: E402
from app.core.coverage import VoronoiPartition  # noqa: E402
from app.core.density import OffensiveFrame, WeightField  # noqa: E402
from app.core.field import as_points, house_boundary  # noqa: E402
from app.core.logging import log_timed  # noqa: E402

logger = logging.getLogger(__name__)

DEFENDER_COLOR = "tab:blue"
HOLDER_COLOR = "tab:orange"
ATTACKER_COLOR = "tab:red"

# fixed ids and no timestamp keep repeated renders byte-identical
_SVG_RC = {"svg.hashsalt": "rink-formation", "svg.fonttype": "none"}


def voronoi_border_segments(partition: VoronoiPartition) -> np.ndarray:
    """Cell-edge segments, shape (m, 2, 2), between grid cells owned by different defenders."""
    grid = partition.grid
    owner = partition.owner
    x_edges = np.arange(grid.nx + 1) * grid.dx
    y_edges = np.arange(grid.ny + 1) * grid.dy

    # owner changes between columns i and i + 1 of row j
    rows, cols = np.nonzero(owner[:, 1:] != owner[:, :-1])
    x = x_edges[cols + 1]
    vertical = np.stack([np.column_stack([x, y_edges[rows]]), np.column_stack([x, y_edges[rows + 1]])], axis=1)

    rows, cols = np.nonzero(owner[1:, :] != owner[:-1, :])
    y = y_edges[rows + 1]
    horizontal = np.stack([np.column_stack([x_edges[cols], y]), np.column_stack([x_edges[cols + 1], y])], axis=1)
    return np.concatenate([vertical, horizontal], axis=0)


def build_figure(
    frame: OffensiveFrame,
    defenders: ArrayLike | None,
    phi: WeightField,
    partition: VoronoiPartition | None = None,
    pairs: Iterable[Tuple[int, int]] = (),
    *,
    cbf: CbfParams | None = None,
    title: str | None = None,
) -> Figure:
    spec = frame.spec
    grid = phi.grid
    fig = Figure(figsize=(9.0, 9.0 * spec.height / spec.width + 0.6))
    ax = fig.add_subplot(1, 1, 1)

    x_edges = np.linspace(0.0, spec.width, grid.nx + 1)
    y_edges = np.linspace(0.0, spec.height, grid.ny + 1)
    mesh = ax.pcolormesh(x_edges, y_edges, phi.values, cmap="Greens", shading="flat", zorder=0)
    mesh.set_gid("weight-field")
    fig.colorbar(mesh, ax=ax, fraction=0.03, pad=0.01, label="weight")

    outline = Rectangle((0.0, 0.0), spec.width, spec.height, fill=False, edgecolor="black", linewidth=1.2, zorder=3)
    outline.set_gid("field-outline")
    ax.add_patch(outline)
    house = Polygon(house_boundary(), closed=True, fill=False, edgecolor="dimgray", linestyle="--", zorder=3)
    house.set_gid("house-area")
    ax.add_patch(house)

    if partition is not None and partition.n_defenders > 1:
        borders = LineCollection(voronoi_border_segments(partition), colors="black", linewidths=0.6, zorder=2)
        borders.set_gid("voronoi-borders")
        ax.add_collection(borders)

    lanes = 0
    for d_idx, attacker_id in pairs:
        a_idx = frame.index_of(attacker_id)
        try:
            lane = ellipse_from_players(frame.positions[a_idx], frame.holder_position, cbf)
        except DegenerateLaneError:
            continue
        patch = Ellipse(
            xy=tuple(lane.center),
            width=2.0 * lane.semi_major,
            height=2.0 * lane.semi_minor,
            angle=math.degrees(math.atan2(lane.sin_theta, lane.cos_theta)),
            fill=False,
            edgecolor="purple",
            linewidth=1.0,
            zorder=4,
        )
        patch.set_gid(f"lane-{d_idx + 1}-{attacker_id}")
        ax.add_patch(patch)
        lanes += 1

    holder = frame.holder_index
    others = [i for i in range(frame.n) if i != holder]
    if others:
        ax.scatter(frame.positions[others, 0], frame.positions[others, 1], c=ATTACKER_COLOR, s=40, zorder=5, label="attackers")
    ax.scatter([frame.positions[holder, 0]], [frame.positions[holder, 1]], c=HOLDER_COLOR, s=60, zorder=5, label="puck holder")
    if defenders is not None:
        pts = as_points(defenders).reshape(-1, 2)
        ax.scatter(pts[:, 0], pts[:, 1], c=DEFENDER_COLOR, s=40, zorder=5, label="defenders")
        for k, (x, y) in enumerate(pts):
            ax.annotate(str(k + 1), (x, y), textcoords="offset points", xytext=(4, 4), fontsize=7)

    ax.set_xlim(0.0, spec.width)
    ax.set_ylim(0.0, spec.height)
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(title or f"t = {frame.t:.2f} s")
    ax.legend(loc="upper right", fontsize=7)
    logger.debug("Built figure t=%.2f lanes=%d", frame.t, lanes)
    return fig


def save_svg(fig: Figure, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context(_SVG_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})
    return path


def render_svg(
    frame: OffensiveFrame,
    defenders: ArrayLike | None,
    phi: WeightField,
    partition: VoronoiPartition | None,
    pairs: Iterable[Tuple[int, int]],
    path: str | Path,
    *,
    cbf: CbfParams | None = None,
) -> Path:
    with log_timed(logger, context=f"render:{Path(path).name}"):
        fig = build_figure(frame, defenders, phi, partition, pairs, cbf=cbf)
        return save_svg(fig, path)


def render_weight_field(frame: OffensiveFrame, phi: WeightField, path: str | Path) -> Path:
    """Heatmap of the weight field with the offensive players only."""
    with log_timed(logger, context=f"render:{Path(path).name}"):
        fig = build_figure(frame, None, phi, title=f"weight field, t = {frame.t:.2f} s")
        return save_svg(fig, path)
