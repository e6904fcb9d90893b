from __future__ import annotations

import logging
from contextlib import contextmanager
from time import perf_counter
from typing import Any, Dict, Iterator

import numpy as np


def configure_logging(level: int | str = logging.INFO) -> None:
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
        if not isinstance(level, int):
            level = logging.INFO
    logging.basicConfig(
        level=level,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
    )


@contextmanager
def log_timed(logger: logging.Logger, *, context: str, payload: Dict[str, Any] | None = None) -> Iterator[None]:
    start = perf_counter()
    logger.debug("Starting %s", context, extra={"context": context, "payload": _compact(payload)})
    try:
        yield
    finally:
        duration = perf_counter() - start
        logger.info("Completed %s in %.3fs", context, duration, extra={"context": context, "duration_sec": round(duration, 3)})


def _compact(payload: Dict[str, Any] | None) -> Dict[str, Any] | None:
    # arrays are summarized by shape so debug lines stay one line long
    if payload is None:
        return None
    compact: Dict[str, Any] = {}
    for key, value in payload.items():
        if isinstance(value, np.ndarray):
            compact[key] = f"ndarray{value.shape}"
        else:
            compact[key] = value
    return compact
