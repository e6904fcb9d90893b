"""Per-step defensive formation loop.

Each step builds the weight field, moves every defender toward its Voronoi centroid,
filters the inputs of defenders selected for a pass cut through the ellipsoidal barrier,
clamps speeds to the skating cap and integrates one Euler step.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.core.cbf import CbfParams, DegenerateLaneError, ellipse_from_players, h_ellipse, qp_filter
from app.core.config import Settings
from app.core.coverage import VoronoiPartition, assign_voronoi, cell_centroids, coverage_cost, nominal_input
from app.core.density import DensityParams, OffensiveFrame, WeightField, build_weight_field
from app.core.field import RINK, FieldSpec, FloatArray, Grid, as_points, clamp_to_field, house_mask, make_grid
from app.core.logging import log_timed
from app.core.scene import Scene

logger = logging.getLogger(__name__)

N_DEFENDERS = 5
DEFAULT_DEFENDERS: Tuple[Tuple[float, float], ...] = ((10.0, 7.0), (10.0, 11.0), (10.0, 15.0), (10.0, 19.0), (10.0, 23.0))
# caps extraction-noise spikes in the recorded trajectories
OFFENSE_SPEED_CAP = 15.0


class SimulationError(RuntimeError):
    pass


class SceneTooShortError(SimulationError):
    """The scene does not span a single step of the time lattice."""


class SimParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    k: float = Field(1.0, gt=0)
    dt: float = Field(0.1, gt=0)
    p_gain: float = Field(2.0, gt=0)
    grid_resolution: float = Field(0.25, gt=0, le=1)
    d: float = Field(0.01, gt=0)
    initial_defenders: Tuple[Tuple[float, float], ...] = DEFAULT_DEFENDERS
    workers: int = Field(1, ge=1)

    @field_validator("initial_defenders")
    @classmethod
    def _five_defenders(cls, value: Tuple[Tuple[float, float], ...]) -> Tuple[Tuple[float, float], ...]:
        if len(value) != N_DEFENDERS:
            raise ValueError(f"exactly {N_DEFENDERS} defenders are simulated, got {len(value)}")
        for x, y in value:
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ValueError("defender positions must be finite")
        return value

    @classmethod
    def from_settings(cls, settings: Settings, **overrides: object) -> "SimParams":
        values: Dict[str, object] = {
            "k": settings.k_gain,
            "dt": settings.dt,
            "p_gain": settings.p_gain,
            "grid_resolution": settings.grid_resolution,
            "d": settings.cbf_minor_height,
            "workers": settings.workers,
        }
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)

    @property
    def density(self) -> DensityParams:
        return DensityParams(p_gain=self.p_gain)

    @property
    def cbf(self) -> CbfParams:
        return CbfParams(d=self.d)


@dataclass(frozen=True)
class PasscutPairs:
    """(defender index, attacker id) pairs in selection order."""

    pairs: Tuple[Tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        defenders = [d for d, _ in self.pairs]
        attackers = [a for _, a in self.pairs]
        if len(set(defenders)) != len(defenders) or len(set(attackers)) != len(attackers):
            raise ValueError(f"pass-cut pairs must be one-to-one: {self.pairs}")

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def attacker_for(self, defender: int) -> Optional[int]:
        for d, a in self.pairs:
            if d == defender:
                return a
        return None


@dataclass(frozen=True)
class StepRecord:
    t: float
    positions: FloatArray
    u_nom: FloatArray
    u: FloatArray
    pairs: PasscutPairs
    h: FloatArray  # nan for unpaired defenders
    cost: float
    clamped: np.ndarray
    infeasible: np.ndarray


@dataclass
class SimTrace:
    scene_name: str
    params: SimParams
    records: List[StepRecord] = field(default_factory=list)
    final_positions: Optional[FloatArray] = None

    def __len__(self) -> int:
        return len(self.records)

    @property
    def max_speed(self) -> float:
        if not self.records:
            return 0.0
        return float(max(np.max(np.hypot(r.u[:, 0], r.u[:, 1])) for r in self.records))

    @property
    def costs(self) -> List[float]:
        return [r.cost for r in self.records]

    @property
    def clamp_count(self) -> int:
        return int(sum(np.count_nonzero(r.clamped) for r in self.records))

    @property
    def infeasible_count(self) -> int:
        return int(sum(np.count_nonzero(r.infeasible) for r in self.records))


@dataclass(frozen=True)
class StepContext:
    frame: OffensiveFrame
    phi: WeightField
    partition: VoronoiPartition
    record: StepRecord


@dataclass(frozen=True)
class FormationMetrics:
    mean_nearest_distance: float
    defenders_in_house: int
    attackers_in_house: int
    paired: int


StepCallback = Callable[[int, FloatArray, StepContext], None]


def _defenders(defenders: ArrayLike) -> FloatArray:
    pts = as_points(defenders).reshape(-1, 2)
    if pts.shape[0] != N_DEFENDERS:
        raise SimulationError(f"expected {N_DEFENDERS} defenders, got {pts.shape[0]}")
    return pts


def select_passcut_pairs(
    defenders: ArrayLike, frame: OffensiveFrame, params: CbfParams | None = None
) -> PasscutPairs:
    params = params or CbfParams()
    pts = as_points(defenders).reshape(-1, 2)
    goal = frame.spec.goal_point
    holder = frame.holder_index
    holder_pos = frame.positions[holder]

    attacker_in = house_mask(frame.positions[:, 0], frame.positions[:, 1])
    o_house = [i for i in range(frame.n) if i != holder and attacker_in[i]]
    # nearest to the goal first, lowest id on ties
    o_house.sort(key=lambda i: (float(np.hypot(*(frame.positions[i] - goal))), frame.ids[i]))
    d_house = np.flatnonzero(house_mask(pts[:, 0], pts[:, 1])).tolist()

    pairs: List[Tuple[int, int]] = []
    for i in o_house:
        if not d_house:
            break
        try:
            lane = ellipse_from_players(frame.positions[i], holder_pos, params)
        except DegenerateLaneError:
            logger.warning("No pass lane between attacker %s and the puck holder at t=%.3f", frame.ids[i], frame.t)
            continue
        h_values = h_ellipse(pts[d_house], lane)
        best = d_house[int(np.argmax(h_values))]
        pairs.append((best, frame.ids[i]))
        d_house.remove(best)
    return PasscutPairs(tuple(pairs))


def clamp_speed(u: ArrayLike, cap: float) -> Tuple[FloatArray, np.ndarray]:
    u = np.array(u, dtype=float)
    norms = np.hypot(u[:, 0], u[:, 1])
    over = norms > cap
    u[over] *= (cap / norms[over])[:, None]
    # rescaling can land one ulp above the cap
    still = np.hypot(u[:, 0], u[:, 1]) > cap
    u[still] *= 1.0 - 4e-16
    return u, over


def _advance(
    defenders: ArrayLike,
    frame: OffensiveFrame,
    params: SimParams,
    grid: Grid,
) -> Tuple[FloatArray, StepContext]:
    pts = _defenders(defenders)
    spec = frame.spec

    phi = build_weight_field(frame, params.density, grid, workers=params.workers)
    partition = assign_voronoi(pts, grid)
    centroids = cell_centroids(partition, phi, pts)
    u_nom = nominal_input(pts, centroids, params.k)
    cost = coverage_cost(pts, phi, partition)

    pairs = select_passcut_pairs(pts, frame, params.cbf)
    u = u_nom.copy()
    h = np.full(N_DEFENDERS, np.nan)
    infeasible = np.zeros(N_DEFENDERS, dtype=bool)
    holder = frame.holder_index
    # selection already dropped lanes shorter than l_min
    for d_idx, attacker_id in pairs:
        a_idx = frame.index_of(attacker_id)
        lane = ellipse_from_players(
            frame.positions[a_idx],
            frame.positions[holder],
            params.cbf,
            v_1=frame.velocities[a_idx],
            v_2=frame.velocities[holder],
        )
        result = qp_filter(u_nom[d_idx], pts[d_idx], lane, params.cbf)
        u[d_idx] = result.u
        h[d_idx] = h_ellipse(pts[d_idx], lane)
        if result.infeasible:
            infeasible[d_idx] = True
            logger.warning("Infeasible pass-cut filter for defender %d at t=%.3f", d_idx + 1, frame.t)

    u, clamped = clamp_speed(u, spec.speed_cap)
    if np.any(clamped):
        logger.debug("Speed clamp active for defenders %s at t=%.3f", (np.flatnonzero(clamped) + 1).tolist(), frame.t)

    new_positions = clamp_to_field(pts + u * params.dt, spec)
    record = StepRecord(
        t=frame.t,
        positions=pts.copy(),
        u_nom=u_nom,
        u=u,
        pairs=pairs,
        h=h,
        cost=cost,
        clamped=clamped,
        infeasible=infeasible,
    )
    return new_positions, StepContext(frame=frame, phi=phi, partition=partition, record=record)


def step(
    defenders: ArrayLike,
    frame: OffensiveFrame,
    params: SimParams | None = None,
    grid: Grid | None = None,
) -> Tuple[FloatArray, StepRecord]:
    params = params or SimParams()
    grid = grid or make_grid(frame.spec, params.grid_resolution)
    new_positions, ctx = _advance(defenders, frame, params, grid)
    return new_positions, ctx.record


def lattice_frames(scene: Scene, dt: float, spec: FieldSpec = RINK) -> List[OffensiveFrame]:
    """Offensive frames on the simulation time lattice t0, t0 + dt, ...

    Positions are interpolated linearly between recorded frames; velocities are backward
    differences of the interpolated positions (forward difference on the first frame).
    """
    if scene.n_frames < 2:
        raise SceneTooShortError("a scene needs at least two frames")
    t0 = float(scene.times[0])
    n_steps = int(math.floor(scene.duration / dt + 1e-9))
    if n_steps < 1:
        raise SceneTooShortError(f"scene of {scene.duration:.3f}s is shorter than one step of {dt}s")
    times = t0 + dt * np.arange(n_steps + 1)

    n_players = len(scene.ids)
    positions = np.empty((times.shape[0], n_players, 2))
    for p in range(n_players):
        for c in range(2):
            positions[:, p, c] = np.interp(times, scene.times, scene.positions[:, p, c])

    velocities = np.empty_like(positions)
    velocities[1:] = (positions[1:] - positions[:-1]) / dt
    velocities[0] = velocities[1]
    speed = np.hypot(velocities[..., 0], velocities[..., 1])
    over = speed > OFFENSE_SPEED_CAP
    velocities[over] *= (OFFENSE_SPEED_CAP / speed[over])[:, None]

    return [
        OffensiveFrame(
            t=float(times[k]),
            ids=scene.ids,
            positions=positions[k],
            velocities=velocities[k],
            puck_holder=scene.holder_at(float(times[k])),
            spec=spec,
        )
        for k in range(n_steps)
    ]


def initial_defenders(scene: Scene, params: SimParams) -> FloatArray:
    if scene.defenders is not None:
        return _defenders(scene.defenders)
    return np.array(params.initial_defenders, dtype=float)


def run(
    scene: Scene,
    params: SimParams | None = None,
    *,
    grid: Grid | None = None,
    on_step: StepCallback | None = None,
) -> SimTrace:
    params = params or SimParams()
    frames = lattice_frames(scene, params.dt)
    grid = grid or make_grid(frames[0].spec, params.grid_resolution)
    positions = initial_defenders(scene, params)
    trace = SimTrace(scene_name=scene.name, params=params)

    with log_timed(logger, context=f"run:{scene.name}", payload={"steps": len(frames), "p_gain": params.p_gain}):
        for k, frame in enumerate(frames):
            positions, ctx = _advance(positions, frame, params, grid)
            trace.records.append(ctx.record)
            if on_step is not None:
                on_step(k, positions, ctx)
            logger.debug(
                "step %d t=%.2f J=%.3f pairs=%s", k, frame.t, ctx.record.cost, list(ctx.record.pairs)
            )
    trace.final_positions = positions
    return trace


def formation_metrics(
    defenders: ArrayLike, frame: OffensiveFrame, pairs: PasscutPairs | None = None
) -> FormationMetrics:
    pts = as_points(defenders).reshape(-1, 2)
    gaps = np.hypot(
        frame.positions[:, None, 0] - pts[None, :, 0],
        frame.positions[:, None, 1] - pts[None, :, 1],
    )
    return FormationMetrics(
        mean_nearest_distance=float(np.mean(np.min(gaps, axis=1))),
        defenders_in_house=int(np.count_nonzero(house_mask(pts[:, 0], pts[:, 1]))),
        attackers_in_house=int(np.count_nonzero(house_mask(frame.positions[:, 0], frame.positions[:, 1]))),
        paired=len(pairs) if pairs is not None else 0,
    )


def sweep_p(
    scene: Scene, params: SimParams | None = None, p_values: Sequence[float] = (0.5, 3.0, 10.0)
) -> Dict[float, FormationMetrics]:
    """Final formation metrics for each house gain p, all other parameters fixed."""
    params = params or SimParams()
    results: Dict[float, FormationMetrics] = {}
    with log_timed(logger, context=f"sweep:{scene.name}", payload={"p_values": list(p_values)}):
        for p in p_values:
            trial = params.model_copy(update={"p_gain": float(p)})
            trace = run(scene, trial)
            results[float(p)] = formation_metrics(trace.final_positions, final_frame(scene, trial), trace.records[-1].pairs)
    return results


def final_frame(scene: Scene, params: SimParams) -> OffensiveFrame:
    return lattice_frames(scene, params.dt)[-1]

