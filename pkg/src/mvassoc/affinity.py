"""Affinity matrices of detection-pair match probabilities.

Two metrics fill the matrix:

* ``M4`` — single-frame fusion: the keypoint confidences supporting a
  detection pair are combined as independent evidence for the same event,
  ``1 - prod(1 - c_k)``, so any strong cue dominates and extra weak cues
  never lower the score.
* ``M5`` — multi-frame: the arithmetic mean of the single-frame score
  over a short window of annotated frames, linked within each camera by
  the dataset's per-camera person ids.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .correspondence import KeypointMatch
from .dataset import Detection

METRICS = ("M4", "M5")


def affinity_m4(confidences: Iterable[float]) -> float:
    """Fuse keypoint confidences into one match probability (no evidence -> 0)."""
    c = np.asarray(list(confidences), dtype=float)
    if c.size == 0:
        return 0.0
    if np.any((c < 0) | (c > 1)):
        raise ValueError("confidences must lie in [0, 1]")
    return float(min(1.0, max(0.0, 1.0 - np.prod(1.0 - c))))


def affinity_m5(per_frame_values: Sequence[tuple[int, float]]) -> float:
    """Mean single-frame score over the frames where both detections exist."""
    if len(per_frame_values) == 0:
        raise ValueError("empty window: fall back to the single-frame metric")
    return float(np.mean([v for _, v in per_frame_values]))


class PairHistory:
    """Bounded per-pair record of single-frame scores for the M5 window.

    Keys are (person_id_a, person_id_b); one writer (the pipeline driver)
    appends via ``start_frame``/``record`` in frame order.
    """

    def __init__(self, window: int = 3):
        if window < 1:
            raise ValueError(f"window must be >= 1, got {window}")
        self.window = window
        self._seq = 0
        self._values: dict[tuple[int, int], deque] = {}

    def start_frame(self) -> None:
        self._seq += 1

    def record(self, key: tuple[int, int], frame_id: int, value: float) -> None:
        q = self._values.setdefault(key, deque())
        q.append((self._seq, frame_id, value))
        while q and q[0][0] <= self._seq - self.window:
            q.popleft()

    def windowed(self, key: tuple[int, int]) -> list[tuple[int, float]]:
        """(frame_id, value) entries inside the current window."""
        q = self._values.get(key, ())
        return [(f, v) for s, f, v in q if s > self._seq - self.window]


@dataclass(frozen=True, eq=False)
class AffinityMatrix:
    """Match probabilities for every detection pair of one frame."""

    frame_id: int
    rows: tuple[Detection, ...]
    cols: tuple[Detection, ...]
    values: np.ndarray
    metric_tag: str

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.rows), len(self.cols)):
            raise ValueError(
                f"values shape {v.shape} != ({len(self.rows)}, {len(self.cols)})"
            )
        if v.size and (np.any(v < 0) or np.any(v > 1)):
            raise ValueError("affinity entries must lie in [0, 1]")
        if self.metric_tag not in METRICS:
            raise ValueError(f"unknown metric {self.metric_tag!r}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "rows", tuple(self.rows))
        object.__setattr__(self, "cols", tuple(self.cols))


def build_affinity(
    frame_id: int,
    dets_a: Sequence[Detection],
    dets_b: Sequence[Detection],
    grouped_matches: Mapping[tuple[int, int], Sequence[KeypointMatch]],
    metric: str = "M4",
    window: int = 3,
    history: PairHistory | None = None,
) -> AffinityMatrix:
    """Fill the |A| x |B| affinity matrix with the chosen metric.

    For M5 the caller supplies the cross-frame ``history`` buffer and
    calls this once per frame in order; the current frame always
    contributes, so the window is never empty.
    """
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    for i, j in grouped_matches:
        if not (0 <= i < len(dets_a) and 0 <= j < len(dets_b)):
            raise ValueError(f"grouped match key {(i, j)} out of bounds")
    single = np.zeros((len(dets_a), len(dets_b)))
    for (i, j), matches in grouped_matches.items():
        single[i, j] = affinity_m4(m.confidence for m in matches)
    if metric == "M4":
        return AffinityMatrix(frame_id, tuple(dets_a), tuple(dets_b), single, "M4")

    if history is None:
        raise ValueError("metric M5 requires a PairHistory")
    if history.window != window:
        raise ValueError(
            f"history window {history.window} != requested window {window}"
        )
    history.start_frame()
    for i, da in enumerate(dets_a):
        for j, db in enumerate(dets_b):
            history.record(
                (da.person_id, db.person_id), frame_id, float(single[i, j])
            )
    values = np.zeros_like(single)
    for i, da in enumerate(dets_a):
        for j, db in enumerate(dets_b):
            values[i, j] = affinity_m5(
                history.windowed((da.person_id, db.person_id))
            )
    return AffinityMatrix(frame_id, tuple(dets_a), tuple(dets_b), values, "M5")


def save_affinity(path, am: AffinityMatrix) -> None:
    """Delimited text export with row/column person ids for inspection."""
    lines = [
        f"frame={am.frame_id} metric={am.metric_tag}",
        "cols " + " ".join(str(d.person_id) for d in am.cols),
    ]
    for det, row in zip(am.rows, am.values):
        lines.append(
            str(det.person_id) + " " + " ".join(repr(float(v)) for v in row)
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
