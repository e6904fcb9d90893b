from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from app.core.field import FloatArray


@dataclass(frozen=True)
class Scene:
    """Recorded offensive trajectories.

    ``positions`` has shape (frames, players, 2) with players ordered as ``ids``;
    ``holders[f]`` is the puck holder's id in frame f.
    """

    name: str
    source: str
    fps: float
    times: FloatArray
    ids: Tuple[int, ...]
    positions: FloatArray
    holders: Tuple[int, ...]
    defenders: Optional[FloatArray] = None

    @property
    def n_frames(self) -> int:
        return int(self.times.shape[0])

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def holder_at(self, t: float) -> int:
        # zero-order hold on the recorded holder
        idx = int(np.searchsorted(self.times, t, side="right")) - 1
        return self.holders[max(idx, 0)]
