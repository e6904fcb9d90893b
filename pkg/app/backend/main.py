from __future__ import annotations

import logging
import tempfile
from pathlib import Path
from typing import Dict

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware

from app.backend.outputs import trace_rows
from app.backend.render import render_weight_field
from app.backend.scene_io import SceneError, scene_from_document
from app.backend.schemas import (
    FormationSummary,
    RunOverrides,
    SceneDocument,
    SimulateRequest,
    SimulateResponse,
    SweepRequest,
    SweepResponse,
    ValidateResponse,
    WeightFieldRequest,
    WeightFieldResponse,
)
from app.backend.services.simulation_service import SimulationService
from app.core.config import get_settings
from app.core.engine import FormationMetrics, SceneTooShortError, SimParams
from app.core.logging import configure_logging
from app.core.scene import Scene

settings = get_settings()
configure_logging(settings.log_level)
logger = logging.getLogger(__name__)

app = FastAPI(title="Rink Formation Backend")
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

simulation_service = SimulationService(settings)


def _scene(document: SceneDocument) -> Scene:
    try:
        return scene_from_document(document)
    except SceneError as exc:
        raise HTTPException(status_code=422, detail=str(exc))


def _params(overrides: RunOverrides) -> SimParams:
    return simulation_service.params(
        p_gain=overrides.p_gain, dt=overrides.dt, grid_resolution=overrides.grid_resolution
    )


def _summary(metrics: FormationMetrics) -> FormationSummary:
    return FormationSummary(
        mean_nearest_distance=metrics.mean_nearest_distance,
        defenders_in_house=metrics.defenders_in_house,
        attackers_in_house=metrics.attackers_in_house,
        paired=metrics.paired,
    )


@app.post("/scenes/validate", response_model=ValidateResponse)
def validate_scene(document: SceneDocument) -> ValidateResponse:
    scene = _scene(document)
    return ValidateResponse(
        name=scene.name,
        source=scene.source,
        frames=scene.n_frames,
        players=list(scene.ids),
        duration=scene.duration,
    )


@app.post("/simulate", response_model=SimulateResponse)
def simulate(request: SimulateRequest) -> SimulateResponse:
    scene = _scene(request.scene)
    try:
        result = simulation_service.simulate(scene, _params(request))
    except SceneTooShortError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    except Exception as exc:  # pragma: no cover - fallback safety
        logger.exception("Simulation failed for %s", scene.name)
        raise HTTPException(status_code=500, detail="Simulation failed") from exc
    trace = result.trace
    return SimulateResponse(
        steps=len(trace),
        max_speed=trace.max_speed,
        clamp_count=trace.clamp_count,
        infeasible_count=trace.infeasible_count,
        final_positions=[(float(x), float(y)) for x, y in trace.final_positions],
        metrics=_summary(result.metrics),
        rows=trace_rows(trace) if request.include_rows else None,
    )


@app.post("/weightfield", response_model=WeightFieldResponse)
def weightfield(request: WeightFieldRequest) -> WeightFieldResponse:
    scene = _scene(request.scene)
    params = _params(request)
    try:
        frame, phi = simulation_service.weight_field(scene, request.frame, params)
    except (SceneError, SceneTooShortError) as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    with tempfile.TemporaryDirectory() as tmp:
        svg_path = render_weight_field(frame, phi, Path(tmp) / "field.svg")
        svg = svg_path.read_text(encoding="utf-8")
    return WeightFieldResponse(
        t=frame.t,
        total_mass=float(phi.values.sum() * phi.grid.cell_area),
        max_value=float(phi.values.max()),
        svg=svg,
    )


@app.post("/sweep", response_model=SweepResponse)
def sweep(request: SweepRequest) -> SweepResponse:
    scene = _scene(request.scene)
    try:
        results = simulation_service.sweep(scene, request.p_values, _params(request))
    except SceneTooShortError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    except Exception as exc:  # pragma: no cover - fallback safety
        logger.exception("Sweep failed for %s", scene.name)
        raise HTTPException(status_code=500, detail="Sweep failed") from exc
    return SweepResponse(results={f"{p:g}": _summary(m) for p, m in results.items()})


@app.get("/health")
def health() -> Dict[str, str]:
    return {"status": "ok"}
