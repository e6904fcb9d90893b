# app/core/config.py
from __future__ import annotations
from functools import lru_cache
from pathlib import Path

from pydantic import Field, AliasChoices
from pydantic_settings import BaseSettings, SettingsConfigDict

PROJECT_ROOT = Path(__file__).resolve().parents[2]
ENV_PATH = PROJECT_ROOT / ".env"
SCENES_DIR = PROJECT_ROOT / "scenes"


class Settings(BaseSettings):
    dt: float = Field(0.1, gt=0, validation_alias=AliasChoices("RINK_DT"))
    k_gain: float = Field(1.0, gt=0, validation_alias=AliasChoices("RINK_K_GAIN"))
    p_gain: float = Field(2.0, gt=0, validation_alias=AliasChoices("RINK_P_GAIN"))
    grid_resolution: float = Field(
        0.25, gt=0, le=1, validation_alias=AliasChoices("RINK_GRID_RESOLUTION")
    )
    cbf_minor_height: float = Field(
        0.01, gt=0, validation_alias=AliasChoices("RINK_CBF_MINOR_HEIGHT")
    )

    # Thread count for weight-field evaluation; output is identical for any value.
    workers: int = Field(1, ge=1, validation_alias=AliasChoices("RINK_WORKERS"))

    log_level: str = Field("INFO", validation_alias=AliasChoices("RINK_LOG_LEVEL"))
    output_dir: Path = Field(Path("out"), validation_alias=AliasChoices("RINK_OUTPUT_DIR"))

    backend_port: int = Field(8000, validation_alias=AliasChoices("BACKEND_PORT"))

    model_config = SettingsConfigDict(
        env_file=str(ENV_PATH),
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )


@lru_cache
def get_settings() -> Settings:
    return Settings()
