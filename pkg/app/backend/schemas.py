from __future__ import annotations

from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field


class PlayerRecord(BaseModel):
    model_config = ConfigDict(allow_inf_nan=False)

    id: int
    x: float
    y: float


class FrameRecord(BaseModel):
    model_config = ConfigDict(allow_inf_nan=False)

    t: float
    puck_holder: int
    players: List[PlayerRecord]


class SceneDocument(BaseModel):
    model_config = ConfigDict(allow_inf_nan=False)

    name: str
    source: str = "synthetic"
    fps: float = Field(gt=0)
    defenders: Optional[List[Tuple[float, float]]] = None
    frames: List[FrameRecord]


class RunOverrides(BaseModel):
    p_gain: Optional[float] = Field(default=None, gt=0)
    dt: Optional[float] = Field(default=None, gt=0)
    grid_resolution: Optional[float] = Field(default=None, gt=0, le=1)


class ValidateResponse(BaseModel):
    name: str
    source: str
    frames: int
    players: List[int]
    duration: float


class SimulateRequest(RunOverrides):
    scene: SceneDocument
    include_rows: bool = True


class TraceRow(BaseModel):
    t: float
    defender_id: int
    x: float
    y: float
    ux: float
    uy: float
    paired_with: Optional[int] = None
    h: Optional[float] = None
    clamped: bool = False


class FormationSummary(BaseModel):
    mean_nearest_distance: float
    defenders_in_house: int
    attackers_in_house: int
    paired: int


class SimulateResponse(BaseModel):
    steps: int
    max_speed: float
    clamp_count: int
    infeasible_count: int
    final_positions: List[Tuple[float, float]]
    metrics: FormationSummary
    rows: Optional[List[TraceRow]] = None


class WeightFieldRequest(RunOverrides):
    scene: SceneDocument
    frame: int = Field(default=0, ge=0)


class WeightFieldResponse(BaseModel):
    t: float
    total_mass: float
    max_value: float
    svg: str


class SweepRequest(RunOverrides):
    scene: SceneDocument
    p_values: List[float] = Field(default_factory=lambda: [0.5, 3.0, 10.0], min_length=1)


class SweepResponse(BaseModel):
    results: Dict[str, FormationSummary]
