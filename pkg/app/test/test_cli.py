from __future__ import annotations

from pathlib import Path

import orjson
import pytest

pytest.importorskip("matplotlib")

from app.backend.services.simulation_service import SimulationService  # noqa: E402
from app.cli import EXIT_INVALID, EXIT_OK, EXIT_RUNTIME, main  # noqa: E402
from app.core.config import SCENES_DIR, Settings  # noqa: E402


def test_validate_command(capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["validate", "--scene", str(SCENES_DIR / "crossing.json")]) == EXIT_OK
    assert "crossing" in capsys.readouterr().out


def test_validate_reports_bad_scene(tmp_path: Path) -> None:
    bad = tmp_path / "bad.json"
    bad.write_bytes(
        orjson.dumps(
            {
                "name": "bad",
                "fps": 1.0,
                "frames": [
                    {"t": 0.0, "puck_holder": 1, "players": [{"id": 1, "x": 70.0, "y": 10.0}]},
                    {"t": 1.0, "puck_holder": 1, "players": [{"id": 1, "x": 10.0, "y": 10.0}]},
                ],
            }
        )
    )
    assert main(["validate", "--scene", str(bad)]) == EXIT_INVALID
    assert main(["validate", "--scene", str(tmp_path / "missing.json")]) == EXIT_INVALID


def test_simulate_writes_trace_and_snapshots(tmp_path: Path) -> None:
    out = tmp_path / "run"
    code = main(
        [
            "simulate",
            "--scene", str(SCENES_DIR / "slot_pass_reconstruction.json"),
            "--p-gain", "3",
            "--dt", "0.1",
            "--grid-res", "1.0",
            "--out", str(out),
            "--svg-every", "20",
        ]
    )
    assert code == EXIT_OK
    lines = (out / "trace.csv").read_text(encoding="utf-8").splitlines()
    assert len(lines) == 1 + 5 * 45
    summary = orjson.loads((out / "summary.json").read_bytes())
    assert summary["params"]["p_gain"] == 3.0
    assert sorted(p.name for p in out.glob("*.svg")) == ["step_00000.svg", "step_00020.svg", "step_00040.svg"]


def test_simulate_rejects_bad_parameters(tmp_path: Path) -> None:
    code = main(["simulate", "--scene", str(SCENES_DIR / "crossing.json"), "--grid-res", "2.0", "--out", str(tmp_path)])
    assert code == EXIT_INVALID


def test_scene_shorter_than_one_step_is_invalid(tmp_path: Path) -> None:
    code = main(["simulate", "--scene", str(SCENES_DIR / "crossing.json"), "--dt", "100", "--out", str(tmp_path)])
    assert code == EXIT_INVALID


class _FailingService(SimulationService):
    def simulate(self, *args, **kwargs):
        raise ValueError("non-finite centroid")


def test_failure_during_a_run_is_a_runtime_error(tmp_path: Path) -> None:
    service = _FailingService(Settings(_env_file=None))
    code = main(["simulate", "--scene", str(SCENES_DIR / "crossing.json"), "--out", str(tmp_path)], service=service)
    assert code == EXIT_RUNTIME


def test_weightfield_command(tmp_path: Path) -> None:
    svg = tmp_path / "phi.svg"
    csv_path = tmp_path / "phi.csv"
    code = main(
        [
            "weightfield",
            "--scene", str(SCENES_DIR / "crossing.json"),
            "--frame", "10",
            "--grid-res", "1.0",
            "--out", str(svg),
            "--csv", str(csv_path),
        ]
    )
    assert code == EXIT_OK
    assert "<svg" in svg.read_text(encoding="utf-8")
    assert len(csv_path.read_text(encoding="utf-8").splitlines()) == 1 + 61 * 30


def test_weightfield_frame_out_of_range(tmp_path: Path) -> None:
    code = main(
        ["weightfield", "--scene", str(SCENES_DIR / "crossing.json"), "--frame", "500", "--out", str(tmp_path / "x.svg")]
    )
    assert code == EXIT_INVALID


def test_sweep_command(tmp_path: Path) -> None:
    code = main(
        [
            "sweep",
            "--scene", str(SCENES_DIR / "crossing.json"),
            "--grid-res", "1.0",
            "--p-values", "0.5", "10",
            "--out", str(tmp_path),
        ]
    )
    assert code == EXIT_OK
    payload = orjson.loads((tmp_path / "sweep.json").read_bytes())
    assert set(payload) == {"0.5", "10"}
    assert "mean_nearest_distance" in payload["10"]
