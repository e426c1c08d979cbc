"""Scoring against ground truth and the hyperparameter sweep harness.

Counts are micro-aggregated: true/false positives and false negatives are
summed over all frames before any ratio is taken.  True negatives are
never counted; with the overwhelming majority of detection pairs being
non-matches they would swamp every other signal.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Sequence

from .assignment import Association
from .dataset import Detection
from .geometry import Homography
from .pipeline import FrameBundle, PipelineConfig, run_sequence

logger = logging.getLogger(__name__)

LOFTR_THRESHOLDS = (0.0, 0.2, 0.4, 0.6)
DISTANCE_COEFFICIENTS = (0.0, 2.0, 5.0, 10.0, 20.0, 40.0)
ASSOCIATION_METRICS = ("M4", "M5")

# The eight overlapping-view camera pairs evaluated on the seven-camera
# pedestrian dataset.
WILDTRACK_CAMERA_PAIRS = (
    (1, 4),
    (1, 6),
    (1, 7),
    (2, 3),
    (4, 7),
    (5, 6),
    (5, 7),
    (6, 7),
)


@dataclass(frozen=True)
class EvalCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn) < 0:
            raise ValueError("counts must be nonnegative")

    def __add__(self, other: "EvalCounts") -> "EvalCounts":
        return EvalCounts(
            self.tp + other.tp, self.fp + other.fp, self.fn + other.fn
        )


@dataclass(frozen=True)
class SweepConfig:
    """One cell of the hyperparameter grid."""

    loftr_threshold: float
    distance_coefficient: float
    metric: str

    def __post_init__(self) -> None:
        if self.metric not in ASSOCIATION_METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")


def sweep_grid(
    thresholds: Sequence[float] = LOFTR_THRESHOLDS,
    coefficients: Sequence[float] = DISTANCE_COEFFICIENTS,
    metrics: Sequence[str] = ASSOCIATION_METRICS,
) -> tuple[SweepConfig, ...]:
    """Full factorial grid; the defaults enumerate 4 x 6 x 2 = 48 configs."""
    return tuple(
        SweepConfig(t, c, m)
        for t, c, m in itertools.product(thresholds, coefficients, metrics)
    )


def score_frame(
    pred: Association,
    dets_a: Sequence[Detection],
    dets_b: Sequence[Detection],
) -> EvalCounts:
    """Count tp/fp/fn for one frame against ground-truth person ids.

    The positive set is the persons detected in both cameras; a predicted
    pair is a true positive iff its two detections share a person id.  A
    wrong match counts once as fp and leaves its persons uncovered (fn).
    """
    covisible = {d.person_id for d in dets_a} & {d.person_id for d in dets_b}
    tp_persons = set()
    fp = 0
    for i, j, _ in pred.pairs:
        pid_a = dets_a[i].person_id
        pid_b = dets_b[j].person_id
        if pid_a == pid_b:
            tp_persons.add(pid_a)
        else:
            fp += 1
    return EvalCounts(
        tp=len(tp_persons), fp=fp, fn=len(covisible - tp_persons)
    )


def f1_from_precision_recall(precision: float, recall: float) -> float:
    """Harmonic mean; 0 when both inputs are 0."""
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def micro_f1(counts: EvalCounts) -> tuple[float, float, float]:
    """(precision, recall, f1) from accumulated counts; 0 on empty denominators."""
    p = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 0.0
    r = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 0.0
    return (p, r, f1_from_precision_recall(p, r))


@dataclass(frozen=True)
class SweepRow:
    """Result of one configuration on one camera pair."""

    pair: tuple[int, int]
    config: SweepConfig
    counts: EvalCounts | None
    precision: float | None
    recall: float | None
    f1: float | None
    error: str | None = None


def run_sweep(
    pair: tuple[int, int],
    bundles: Sequence[FrameBundle],
    homography: Homography,
    configs: Sequence[SweepConfig] | None = None,
    window: int = 3,
    accept_threshold: float = 0.0,
    apply_mask: bool = True,
    jobs: int = 1,
) -> list[SweepRow]:
    """Evaluate every configuration on one camera pair, ranked by micro f1.

    A configuration that fails on any frame (for example a missing match
    file) is recorded as a failed row and the sweep continues; failed
    rows sort last.  Configurations are independent, so ``jobs`` > 1 runs
    them on a thread pool; results are identical to the sequential order.
    """
    if configs is None:
        configs = sweep_grid()

    def evaluate(config: SweepConfig) -> SweepRow:
        pipeline_config = PipelineConfig(
            loftr_threshold=config.loftr_threshold,
            distance_coefficient=config.distance_coefficient,
            metric=config.metric,
            window=window,
            accept_threshold=accept_threshold,
            apply_mask=apply_mask,
        )
        try:
            seq = run_sequence(
                bundles, homography, pipeline_config, on_frame_error="raise"
            )
        except Exception as exc:  # noqa: BLE001 - recorded, sweep continues
            logger.warning("pair %s config %s failed: %s", pair, config, exc)
            return SweepRow(pair, config, None, None, None, None, str(exc))
        totals = EvalCounts()
        for bundle, result in zip(bundles, seq.results):
            totals = totals + score_frame(
                result.association, bundle.detections_a, bundle.detections_b
            )
        p, r, f1 = micro_f1(totals)
        return SweepRow(pair, config, totals, p, r, f1)

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(evaluate, configs))
    else:
        rows = [evaluate(config) for config in configs]
    rows.sort(key=lambda row: -1.0 if row.f1 is None else row.f1, reverse=True)
    return rows
