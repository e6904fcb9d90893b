# app/backend/scene_io.py
from __future__ import annotations

import logging
from pathlib import Path
from typing import List

import numpy as np
import orjson
from pydantic import ValidationError

from app.backend.schemas import FrameRecord, PlayerRecord, SceneDocument
from app.core.engine import N_DEFENDERS
from app.core.field import RINK, FieldSpec
from app.core.logging import log_timed
from app.core.scene import Scene

logger = logging.getLogger(__name__)


class SceneError(Exception):
    pass


class SceneParseError(SceneError):
    pass


class SceneBoundsError(SceneError):
    pass


class MissingPuckHolderError(SceneError):
    pass


class NonMonotoneTimeError(SceneError):
    pass


class PlayerSetMismatchError(SceneError):
    pass


def parse_scene(raw: bytes | str, spec: FieldSpec = RINK) -> Scene:
    try:
        payload = orjson.loads(raw)
    except orjson.JSONDecodeError as exc:
        raise SceneParseError(f"scene is not valid JSON: {exc}") from exc
    try:
        document = SceneDocument.model_validate(payload)
    except ValidationError as exc:
        raise SceneParseError(f"scene does not match the expected layout: {exc}") from exc
    return scene_from_document(document, spec)


def _check_bounds(x: float, y: float, what: str, spec: FieldSpec) -> None:
    if not (0.0 <= x <= spec.width and 0.0 <= y <= spec.height):
        raise SceneBoundsError(f"{what} at ({x}, {y}) is outside the {spec.width:g}x{spec.height:g} m field")


def scene_from_document(document: SceneDocument, spec: FieldSpec = RINK) -> Scene:
    frames = document.frames
    if len(frames) < 2:
        raise SceneParseError(f"scene '{document.name}' needs at least two frames, got {len(frames)}")

    first_ids = sorted(p.id for p in frames[0].players)
    if not first_ids:
        raise SceneParseError(f"scene '{document.name}' has no offensive players")

    positions = np.empty((len(frames), len(first_ids), 2))
    holders: List[int] = []
    previous_t = None
    for f_idx, frame in enumerate(frames):
        if previous_t is not None and frame.t <= previous_t:
            raise NonMonotoneTimeError(f"frame {f_idx} has t={frame.t} after t={previous_t}")
        previous_t = frame.t

        ids = [p.id for p in frame.players]
        if len(set(ids)) != len(ids):
            raise SceneParseError(f"frame {f_idx} repeats a player id: {ids}")
        if sorted(ids) != first_ids:
            raise PlayerSetMismatchError(f"frame {f_idx} has players {sorted(ids)}, expected {first_ids}")
        if frame.puck_holder not in ids:
            raise MissingPuckHolderError(f"frame {f_idx}: puck holder {frame.puck_holder} is not among {sorted(ids)}")

        for player in frame.players:
            _check_bounds(player.x, player.y, f"player {player.id} in frame {f_idx}", spec)
            positions[f_idx, first_ids.index(player.id)] = (player.x, player.y)
        holders.append(frame.puck_holder)

    defenders = None
    if document.defenders is not None:
        if len(document.defenders) != N_DEFENDERS:
            raise SceneParseError(f"expected {N_DEFENDERS} initial defenders, got {len(document.defenders)}")
        for k, (x, y) in enumerate(document.defenders):
            _check_bounds(x, y, f"defender {k + 1}", spec)
        defenders = np.array(document.defenders, dtype=float)

    return Scene(
        name=document.name,
        source=document.source,
        fps=document.fps,
        times=np.array([f.t for f in frames], dtype=float),
        ids=tuple(first_ids),
        positions=positions,
        holders=tuple(holders),
        defenders=defenders,
    )


def load_scene(path: str | Path, spec: FieldSpec = RINK) -> Scene:
    path = Path(path)
    with log_timed(logger, context=f"scene.load:{path.name}"):
        try:
            raw = path.read_bytes()
        except OSError as exc:
            raise SceneParseError(f"cannot read scene file {path}: {exc}") from exc
        scene = parse_scene(raw, spec)
    logger.info("Loaded scene %s: frames=%d players=%d", scene.name, scene.n_frames, len(scene.ids))
    return scene


def scene_to_document(scene: Scene) -> SceneDocument:
    frames = [
        FrameRecord(
            t=float(t),
            puck_holder=scene.holders[f_idx],
            players=[
                PlayerRecord(id=pid, x=float(scene.positions[f_idx, p_idx, 0]), y=float(scene.positions[f_idx, p_idx, 1]))
                for p_idx, pid in enumerate(scene.ids)
            ],
        )
        for f_idx, t in enumerate(scene.times)
    ]
    defenders = None
    if scene.defenders is not None:
        defenders = [(float(x), float(y)) for x, y in scene.defenders]
    return SceneDocument(name=scene.name, source=scene.source, fps=scene.fps, defenders=defenders, frames=frames)


def dump_scene(scene: Scene, path: str | Path) -> Path:
    path = Path(path)
    path.write_bytes(orjson.dumps(scene_to_document(scene).model_dump(), option=orjson.OPT_INDENT_2))
    return path
