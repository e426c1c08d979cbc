"""Per-frame driver: mask, threshold, refactor, group, affinity, assign."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

from .affinity import AffinityMatrix, PairHistory, build_affinity
from .assignment import Association, associate
from .correspondence import (
    MatchSet,
    assign_to_detections,
    filter_by_confidence,
    overlap_mask_filter,
)
from .dataset import Detection, FramePair
from .geometry import Homography
from .refactor import RefactorParams, refactor_matches

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    """One hyperparameter configuration of the association pipeline."""

    loftr_threshold: float = 0.0
    distance_coefficient: float = 0.0
    metric: str = "M4"
    window: int = 3
    accept_threshold: float = 0.0
    apply_mask: bool = True


@dataclass(frozen=True)
class FrameBundle:
    """Everything one frame needs: detections of both cameras plus matches."""

    frame_id: int
    detections_a: tuple[Detection, ...]
    detections_b: tuple[Detection, ...]
    matches: MatchSet | None

    @classmethod
    def from_frame_pair(cls, fp: FramePair, matches: MatchSet | None):
        return cls(fp.frame_id, fp.detections_a, fp.detections_b, matches)


@dataclass(frozen=True)
class FrameResult:
    frame_id: int
    association: Association | None
    affinity: AffinityMatrix | None
    error: str | None = None


@dataclass
class SequenceResult:
    results: list[FrameResult] = field(default_factory=list)

    @property
    def failed_frames(self) -> list[FrameResult]:
        return [r for r in self.results if r.error is not None]


def run_frame(
    bundle: FrameBundle,
    homography: Homography,
    config: PipelineConfig,
    history: PairHistory | None = None,
) -> FrameResult:
    """Run the association pipeline on one frame.

    Raises:
        ValueError: the bundle carries no match set, or M5 is requested
            without a history buffer.
    """
    ms = bundle.matches
    if ms is None:
        raise ValueError(f"frame {bundle.frame_id}: match set missing")
    if config.apply_mask:
        if ms.size_a is None or ms.size_b is None:
            raise ValueError(
                f"frame {bundle.frame_id}: match set lacks image sizes, "
                "cannot apply the overlap mask"
            )
        ms = overlap_mask_filter(ms, homography, ms.size_a, ms.size_b)
    ms = filter_by_confidence(ms, config.loftr_threshold)
    ms = refactor_matches(
        ms, homography, RefactorParams(config.distance_coefficient)
    )
    grouped = assign_to_detections(ms, bundle.detections_a, bundle.detections_b)
    am = build_affinity(
        bundle.frame_id,
        bundle.detections_a,
        bundle.detections_b,
        grouped,
        metric=config.metric,
        window=config.window,
        history=history,
    )
    assoc = associate(am, accept_threshold=config.accept_threshold)
    return FrameResult(bundle.frame_id, assoc, am)


def run_sequence(
    bundles: Sequence[FrameBundle],
    homography: Homography,
    config: PipelineConfig,
    on_frame_error: str = "skip",
) -> SequenceResult:
    """Run frames in order, sharing one M5 history buffer.

    ``on_frame_error='skip'`` records per-frame failures and continues;
    ``'raise'`` propagates the first failure (the sweep runner uses this
    to mark the whole configuration failed).
    """
    if on_frame_error not in ("skip", "raise"):
        raise ValueError(f"unknown on_frame_error {on_frame_error!r}")
    history = PairHistory(config.window) if config.metric == "M5" else None
    out = SequenceResult()
    for bundle in bundles:
        try:
            out.results.append(run_frame(bundle, homography, config, history))
        except Exception as exc:  # noqa: BLE001 - soft per-frame failure
            if on_frame_error == "raise":
                raise
            logger.warning("frame %d failed: %s", bundle.frame_id, exc)
            out.results.append(
                FrameResult(bundle.frame_id, None, None, error=str(exc))
            )
    return out
