from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Any, Dict, List

import orjson

from app.backend.schemas import TraceRow
from app.core.density import WeightField
from app.core.engine import FormationMetrics, SimTrace

TRACE_HEADER = ["t", "defender_id", "x", "y", "ux", "uy", "paired_with", "h", "clamped"]


def _fmt(value: float) -> str:
    # str.format is locale-independent
    return f"{value:.6f}"


def trace_rows(trace: SimTrace) -> List[TraceRow]:
    rows: List[TraceRow] = []
    for record in trace.records:
        for d_idx in range(record.positions.shape[0]):
            h = float(record.h[d_idx])
            rows.append(
                TraceRow(
                    t=record.t,
                    defender_id=d_idx + 1,
                    x=float(record.positions[d_idx, 0]),
                    y=float(record.positions[d_idx, 1]),
                    ux=float(record.u[d_idx, 0]),
                    uy=float(record.u[d_idx, 1]),
                    paired_with=record.pairs.attacker_for(d_idx),
                    h=None if math.isnan(h) else h,
                    clamped=bool(record.clamped[d_idx]),
                )
            )
    return rows


def write_trace(trace: SimTrace, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for row in trace_rows(trace):
            writer.writerow(
                [
                    _fmt(row.t),
                    row.defender_id,
                    _fmt(row.x),
                    _fmt(row.y),
                    _fmt(row.ux),
                    _fmt(row.uy),
                    "" if row.paired_with is None else row.paired_with,
                    "" if row.h is None else _fmt(row.h),
                    int(row.clamped),
                ]
            )
    return path


def write_weight_field_csv(phi: WeightField, path: str | Path) -> Path:
    path = Path(path)
    pts = phi.grid.points
    values = phi.flat
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["x", "y", "value"])
        for (x, y), value in zip(pts, values):
            writer.writerow([_fmt(x), _fmt(y), _fmt(value)])
    return path


def metrics_dict(metrics: FormationMetrics) -> Dict[str, Any]:
    return {
        "mean_nearest_distance": metrics.mean_nearest_distance,
        "defenders_in_house": metrics.defenders_in_house,
        "attackers_in_house": metrics.attackers_in_house,
        "paired": metrics.paired,
    }


def write_summary(trace: SimTrace, metrics: FormationMetrics, path: str | Path) -> Path:
    path = Path(path)
    summary = {
        "scene": trace.scene_name,
        "params": trace.params.model_dump(mode="json"),
        "steps": len(trace),
        "max_speed": trace.max_speed,
        "clamp_count": trace.clamp_count,
        "infeasible_count": trace.infeasible_count,
        "final_positions": [[float(x), float(y)] for x, y in trace.final_positions],
        "final_metrics": metrics_dict(metrics),
        "cost": [float(c) for c in trace.costs],
    }
    path.write_bytes(orjson.dumps(summary, option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS))
    return path
