from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import orjson

from app.backend.outputs import metrics_dict, write_summary, write_trace
from app.backend.render import render_svg, render_weight_field
from app.backend.scene_io import SceneParseError, load_scene
from app.core.config import Settings, get_settings
from app.core.density import OffensiveFrame, WeightField, build_weight_field
from app.core.engine import (
    FormationMetrics,
    SimParams,
    SimTrace,
    StepContext,
    formation_metrics,
    lattice_frames,
    run,
    sweep_p,
)
from app.core.field import FloatArray, make_grid
from app.core.scene import Scene

logger = logging.getLogger(__name__)


@dataclass
class SimulationResult:
    trace: SimTrace
    metrics: FormationMetrics
    trace_path: Optional[Path] = None
    summary_path: Optional[Path] = None
    svg_paths: List[Path] | None = None


class SimulationService:
    def __init__(self, settings: Settings | None = None) -> None:
        self.settings = settings or get_settings()

    def params(
        self,
        *,
        p_gain: float | None = None,
        dt: float | None = None,
        grid_resolution: float | None = None,
        workers: int | None = None,
    ) -> SimParams:
        return SimParams.from_settings(
            self.settings, p_gain=p_gain, dt=dt, grid_resolution=grid_resolution, workers=workers
        )

    def validate(self, path: str | Path) -> Scene:
        return load_scene(path)

    def simulate(
        self,
        scene: Scene,
        params: SimParams | None = None,
        *,
        out_dir: str | Path | None = None,
        svg_every: int = 0,
    ) -> SimulationResult:
        params = params or self.params()
        svg_paths: List[Path] = []
        target = Path(out_dir) if out_dir is not None else None
        if target is not None:
            target.mkdir(parents=True, exist_ok=True)

        def snapshot(k: int, positions: FloatArray, ctx: StepContext) -> None:
            if target is None or svg_every <= 0 or k % svg_every:
                return
            svg_paths.append(
                render_svg(
                    ctx.frame,
                    ctx.record.positions,
                    ctx.phi,
                    ctx.partition,
                    ctx.record.pairs,
                    target / f"step_{k:05d}.svg",
                    cbf=params.cbf,
                )
            )

        trace = run(scene, params, on_step=snapshot)
        last = lattice_frames(scene, params.dt)[-1]
        metrics = formation_metrics(trace.final_positions, last, trace.records[-1].pairs)
        logger.info(
            "Simulated %s: steps=%d max_speed=%.3f clamps=%d infeasible=%d",
            scene.name,
            len(trace),
            trace.max_speed,
            trace.clamp_count,
            trace.infeasible_count,
        )

        result = SimulationResult(trace=trace, metrics=metrics, svg_paths=svg_paths)
        if target is not None:
            result.trace_path = write_trace(trace, target / "trace.csv")
            result.summary_path = write_summary(trace, metrics, target / "summary.json")
        return result

    def weight_field(self, scene: Scene, frame_index: int, params: SimParams | None = None) -> tuple[OffensiveFrame, WeightField]:
        params = params or self.params()
        frames = lattice_frames(scene, params.dt)
        if not 0 <= frame_index < len(frames):
            raise SceneParseError(f"frame {frame_index} is outside 0..{len(frames) - 1}")
        frame = frames[frame_index]
        grid = make_grid(frame.spec, params.grid_resolution)
        return frame, build_weight_field(frame, params.density, grid, workers=params.workers)

    def render_weight_field(self, scene: Scene, frame_index: int, path: str | Path, params: SimParams | None = None) -> Path:
        frame, phi = self.weight_field(scene, frame_index, params)
        return render_weight_field(frame, phi, path)

    def sweep(
        self,
        scene: Scene,
        p_values: Sequence[float],
        params: SimParams | None = None,
        *,
        out_dir: str | Path | None = None,
    ) -> Dict[float, FormationMetrics]:
        results = sweep_p(scene, params or self.params(), p_values)
        if out_dir is not None:
            target = Path(out_dir)
            target.mkdir(parents=True, exist_ok=True)
            payload = {f"{p:g}": metrics_dict(m) for p, m in results.items()}
            (target / "sweep.json").write_bytes(orjson.dumps(payload, option=orjson.OPT_INDENT_2))
        return results
