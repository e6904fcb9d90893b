"""Command-line entry point: ``python -m app.cli {simulate,weightfield,validate,sweep}``.

Exit codes: 0 on success, 1 when the scene or the parameters fail validation,
2 when the simulation itself fails.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

from pydantic import ValidationError

from app.backend.outputs import write_weight_field_csv
from app.backend.render import render_weight_field
from app.backend.scene_io import SceneError
from app.backend.services.simulation_service import SimulationService
from app.core.config import get_settings
from app.core.density import DensityError
from app.core.engine import SceneTooShortError, SimParams
from app.core.field import FieldError
from app.core.logging import configure_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2

# everything else raised while a command runs is a runtime failure
INVALID_INPUT_ERRORS = (SceneError, ValidationError, FieldError, DensityError, SceneTooShortError)


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scene", required=True, type=Path, help="scene JSON file")
    parser.add_argument("--p-gain", type=float, default=None, help="house gain p")
    parser.add_argument("--dt", type=float, default=None, help="time step [s]")
    parser.add_argument("--grid-res", type=float, default=None, help="grid resolution [m], at most 1")
    parser.add_argument("--workers", type=int, default=None, help="threads used for the weight field")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rink", description="Defensive formation simulator for ice hockey.")
    parser.add_argument("--log-level", default=None, help="overrides RINK_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="run a scene and write trace.csv and summary.json")
    _add_run_options(simulate)
    simulate.add_argument("--out", type=Path, default=None, help="output directory")
    simulate.add_argument("--svg-every", type=int, default=0, help="render every N-th step (0 disables)")

    weightfield = sub.add_parser("weightfield", help="render the weight field of one step")
    _add_run_options(weightfield)
    weightfield.add_argument("--frame", type=int, default=0, help="step index on the simulation time lattice")
    weightfield.add_argument("--out", type=Path, required=True, help="SVG file")
    weightfield.add_argument("--csv", type=Path, default=None, help="also write the field as x,y,value CSV")

    validate = sub.add_parser("validate", help="check a scene file")
    validate.add_argument("--scene", required=True, type=Path)

    sweep = sub.add_parser("sweep", help="final formation metrics for several house gains")
    _add_run_options(sweep)
    sweep.add_argument("--p-values", type=float, nargs="+", default=[0.5, 3.0, 10.0])
    sweep.add_argument("--out", type=Path, default=None, help="output directory for sweep.json")
    return parser


def _run_params(service: SimulationService, args: argparse.Namespace) -> SimParams:
    return service.params(p_gain=args.p_gain, dt=args.dt, grid_resolution=args.grid_res, workers=args.workers)


def _simulate(service: SimulationService, args: argparse.Namespace) -> int:
    scene = service.validate(args.scene)
    params = _run_params(service, args)
    out_dir = args.out or service.settings.output_dir
    result = service.simulate(scene, params, out_dir=out_dir, svg_every=args.svg_every)
    print(f"{scene.name}: {len(result.trace)} steps, trace written to {result.trace_path}")
    return EXIT_OK


def _weightfield(service: SimulationService, args: argparse.Namespace) -> int:
    scene = service.validate(args.scene)
    params = _run_params(service, args)
    frame, phi = service.weight_field(scene, args.frame, params)
    path = render_weight_field(frame, phi, args.out)
    if args.csv is not None:
        write_weight_field_csv(phi, args.csv)
    print(f"weight field at t={frame.t:.2f}s written to {path}")
    return EXIT_OK


def _validate(service: SimulationService, args: argparse.Namespace) -> int:
    scene = service.validate(args.scene)
    print(f"{scene.name}: {scene.n_frames} frames, players {list(scene.ids)}, {scene.duration:.2f}s ({scene.source})")
    return EXIT_OK


def _sweep(service: SimulationService, args: argparse.Namespace) -> int:
    scene = service.validate(args.scene)
    results = service.sweep(scene, args.p_values, _run_params(service, args), out_dir=args.out)
    for p, metrics in results.items():
        print(
            f"p={p:g}: mean nearest distance {metrics.mean_nearest_distance:.3f} m, "
            f"defenders in house {metrics.defenders_in_house}"
        )
    return EXIT_OK


COMMANDS: Dict[str, Callable[[SimulationService, argparse.Namespace], int]] = {
    "simulate": _simulate,
    "weightfield": _weightfield,
    "validate": _validate,
    "sweep": _sweep,
}


def main(argv: Optional[List[str]] = None, service: SimulationService | None = None) -> int:
    args = build_parser().parse_args(argv)
    settings = get_settings()
    configure_logging(args.log_level or settings.log_level)
    service = service or SimulationService(settings)
    try:
        return COMMANDS[args.command](service, args)
    except INVALID_INPUT_ERRORS as exc:
        logger.error("Invalid input: %s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:
        logger.exception("Command %s failed", args.command)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
