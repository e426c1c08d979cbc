"""Recompute match confidences from homography-projection residuals.

Each match's A-side point is projected into camera B; the Gaussian of the
pixel distance to the observed B-side point rescales the matcher
confidence.  Geometrically consistent matches keep their confidence,
inconsistent ones are suppressed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .correspondence import KeypointMatch, MatchSet
from .geometry import Homography, apply_homography


@dataclass(frozen=True)
class RefactorParams:
    """Gaussian rescaling parameters.

    ``distance_coefficient`` is the Gaussian scale sigma in pixels; 0
    disables refactoring entirely.  ``symmetric`` additionally projects
    the B-side point back into A and averages the two residuals
    (defaults off: the forward residual alone is the standard path).
    """

    distance_coefficient: float
    symmetric: bool = False

    def __post_init__(self) -> None:
        if self.distance_coefficient < 0:
            raise ValueError(
                f"distance_coefficient must be >= 0, got "
                f"{self.distance_coefficient}"
            )


class RefactorRecord(NamedTuple):
    """Per-match diagnostics: residual, Gaussian factor, old and new confidence."""

    distance_px: float
    gaussian_factor: float
    old_confidence: float
    new_confidence: float


def gaussian_confidence(distance_px: float, coeff: float) -> float:
    """exp(-d^2 / (2 coeff^2)): 1 at zero residual, strictly decreasing."""
    if coeff <= 0:
        raise ValueError(
            f"coeff must be positive (0 means no refactoring), got {coeff}"
        )
    if not math.isfinite(distance_px):
        return 0.0
    return math.exp(-(distance_px * distance_px) / (2.0 * coeff * coeff))


def _residuals(ms: MatchSet, H: Homography, symmetric: bool) -> np.ndarray:
    pa, pb = ms.points_a(), ms.points_b()
    fwd = apply_homography(H, pa) - pb
    with np.errstate(invalid="ignore"):
        d = np.sqrt(np.sum(fwd * fwd, axis=1))
    if symmetric:
        bwd = apply_homography(H.inverse(), pb) - pa
        with np.errstate(invalid="ignore"):
            d = 0.5 * (d + np.sqrt(np.sum(bwd * bwd, axis=1)))
    return np.where(np.isnan(d), np.inf, d)


def refactor_matches(
    ms: MatchSet, H: Homography, params: RefactorParams
) -> MatchSet:
    """Multiply each confidence by the Gaussian of its projection residual.

    A zero distance coefficient returns the input set unchanged.  Matches
    whose A-side point projects to infinity get confidence 0 (maximal
    distrust) rather than faulting.  Match geometry is never altered.
    """
    coeff = params.distance_coefficient
    if coeff == 0:
        return ms
    if not ms.matches:
        return ms
    d = _residuals(ms, H, params.symmetric)
    factors = np.where(
        np.isfinite(d), np.exp(-(d * d) / (2.0 * coeff * coeff)), 0.0
    )
    new_matches = tuple(
        KeypointMatch(m.pt_a, m.pt_b, float(m.confidence * f))
        for m, f in zip(ms.matches, factors)
    )
    return replace(ms, matches=new_matches)


def refactor_records(
    ms: MatchSet, H: Homography, params: RefactorParams
) -> list[RefactorRecord]:
    """Diagnostics for offline analysis of the combination rule."""
    coeff = params.distance_coefficient
    if coeff == 0:
        return [
            RefactorRecord(0.0, 1.0, m.confidence, m.confidence)
            for m in ms.matches
        ]
    d = _residuals(ms, H, params.symmetric)
    records = []
    for m, di in zip(ms.matches, d):
        f = gaussian_confidence(float(di), coeff)
        records.append(
            RefactorRecord(float(di), f, m.confidence, m.confidence * f)
        )
    return records


def write_refactor_diagnostics(path, records: list[RefactorRecord]) -> None:
    lines = ["distance_px gaussian_factor old_confidence new_confidence"]
    for r in records:
        lines.append(
            f"{r.distance_px!r} {r.gaussian_factor!r} "
            f"{r.old_confidence!r} {r.new_confidence!r}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
