"""Keypoint correspondences: interchange files, masking, and bbox grouping.

Match interchange format (one file per frame and camera pair): a header
line of key=value tokens::

    frame=12 cam_a=1 cam_b=4 size_a=1280x720 size_b=1280x720

followed by one whitespace-separated record per match::

    x_a y_a x_b y_b confidence

Exactly five columns per record; anything else is rejected with the
offending line number.  Floats are written with ``repr`` so a write/read
round trip is lossless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .dataset import Detection
from .errors import MaskDegenerateError, MatchFormatError
from .geometry import Homography

_HEADER_KEYS = ("frame", "cam_a", "cam_b", "size_a", "size_b")


@dataclass(frozen=True)
class KeypointMatch:
    """A point pair across two views with a matcher confidence in [0, 1]."""

    pt_a: tuple[float, float]
    pt_b: tuple[float, float]
    confidence: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "pt_a", (float(self.pt_a[0]), float(self.pt_a[1])))
        object.__setattr__(self, "pt_b", (float(self.pt_b[0]), float(self.pt_b[1])))
        object.__setattr__(self, "confidence", float(self.confidence))
        if not all(math.isfinite(v) for v in (*self.pt_a, *self.pt_b)):
            raise ValueError(f"match points must be finite: {self}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence outside [0, 1]: {self.confidence}")


@dataclass(frozen=True)
class MatchSet:
    """All keypoint matches of one frame for one camera pair."""

    frame_id: int
    camera_a: int
    camera_b: int
    matches: tuple[KeypointMatch, ...]
    provenance: str = "file"
    size_a: tuple[int, int] | None = None
    size_b: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if self.camera_a == self.camera_b:
            raise ValueError("cameras must be distinct")
        object.__setattr__(self, "matches", tuple(self.matches))

    def __len__(self) -> int:
        return len(self.matches)

    def points_a(self) -> np.ndarray:
        return np.array([m.pt_a for m in self.matches]).reshape(-1, 2)

    def points_b(self) -> np.ndarray:
        return np.array([m.pt_b for m in self.matches]).reshape(-1, 2)

    def confidences(self) -> np.ndarray:
        return np.array([m.confidence for m in self.matches])


def match_file_name(frame_id: int, camera_a: int, camera_b: int) -> str:
    return f"matches_f{frame_id:08d}_c{camera_a}_c{camera_b}.txt"


def _parse_size(token: str, line_no: int) -> tuple[int, int]:
    try:
        w, h = token.split("x")
        return (int(w), int(h))
    except ValueError as exc:
        raise MatchFormatError(f"line {line_no}: bad size {token!r}") from exc


def load_matches(path) -> MatchSet:
    """Parse an interchange file, validating confidences and coordinates."""
    path = Path(path)
    if not path.is_file():
        raise MatchFormatError(f"match file not found: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise MatchFormatError(f"{path}: missing header line")

    header: dict[str, str] = {}
    for token in lines[0].split():
        key, _, value = token.partition("=")
        header[key] = value
    missing = [k for k in _HEADER_KEYS if k not in header]
    if missing:
        raise MatchFormatError(f"{path}: header missing {missing}")
    try:
        frame_id = int(header["frame"])
        camera_a = int(header["cam_a"])
        camera_b = int(header["cam_b"])
    except ValueError as exc:
        raise MatchFormatError(f"{path}: line 1: {exc}") from exc
    size_a = _parse_size(header["size_a"], 1)
    size_b = _parse_size(header["size_b"], 1)

    matches = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cols = line.split()
        if len(cols) != 5:
            raise MatchFormatError(
                f"{path}: line {line_no}: expected 5 columns, got {len(cols)}"
            )
        try:
            xa, ya, xb, yb, conf = (float(c) for c in cols)
        except ValueError as exc:
            raise MatchFormatError(f"{path}: line {line_no}: {exc}") from exc
        if not all(math.isfinite(v) for v in (xa, ya, xb, yb)):
            raise MatchFormatError(
                f"{path}: line {line_no}: non-finite coordinate"
            )
        if not 0.0 <= conf <= 1.0:
            raise MatchFormatError(
                f"{path}: line {line_no}: confidence {conf} outside [0, 1]"
            )
        matches.append(KeypointMatch((xa, ya), (xb, yb), conf))
    return MatchSet(
        frame_id=frame_id,
        camera_a=camera_a,
        camera_b=camera_b,
        matches=tuple(matches),
        provenance="file",
        size_a=size_a,
        size_b=size_b,
    )


def save_matches(path, ms: MatchSet) -> None:
    """Write the interchange format (lossless float round trip)."""
    if ms.size_a is None or ms.size_b is None:
        raise ValueError("match set must carry image sizes to be saved")
    out = [
        f"frame={ms.frame_id} cam_a={ms.camera_a} cam_b={ms.camera_b} "
        f"size_a={ms.size_a[0]}x{ms.size_a[1]} "
        f"size_b={ms.size_b[0]}x{ms.size_b[1]}"
    ]
    for m in ms.matches:
        out.append(
            f"{m.pt_a[0]!r} {m.pt_a[1]!r} {m.pt_b[0]!r} {m.pt_b[1]!r} "
            f"{m.confidence!r}"
        )
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


def filter_by_confidence(ms: MatchSet, threshold: float) -> MatchSet:
    """Keep matches with confidence >= threshold, preserving order."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold outside [0, 1]: {threshold}")
    kept = tuple(m for m in ms.matches if m.confidence >= threshold)
    return replace(ms, matches=kept)


_W_CLIP = 1e-12


def _clip_positive_w(hom: np.ndarray) -> np.ndarray | None:
    """Sutherland-Hodgman clip of a homogeneous polygon against w >= eps.

    Edges interpolate linearly in homogeneous coordinates, so the clipped
    piece dehomogenizes to a convex polygon.  Returns its (N, 2) vertices
    or None when nothing survives.
    """
    n = len(hom)
    clipped: list[np.ndarray] = []
    for i in range(n):
        p, q = hom[i], hom[(i + 1) % n]
        p_in, q_in = p[2] >= _W_CLIP, q[2] >= _W_CLIP
        if p_in:
            clipped.append(p)
        if p_in != q_in:
            t = (_W_CLIP - p[2]) / (q[2] - p[2])
            clipped.append(p + t * (q - p))
    if len(clipped) < 3:
        return None
    verts = np.array(clipped)
    return verts[:, :2] / verts[:, 2:3]


def _polygon_area(poly: np.ndarray) -> float:
    n = len(poly)
    return 0.5 * abs(
        sum(
            poly[i, 0] * poly[(i + 1) % n, 1] - poly[(i + 1) % n, 0] * poly[i, 1]
            for i in range(n)
        )
    )


def overlap_polygons(
    H, size_src: tuple[int, int], size_dst: tuple[int, int]
) -> list[np.ndarray]:
    """Warp the destination image rectangle into source pixels through H^-1.

    The warp is a projective quadrilateral: when the destination rectangle
    straddles the plane's horizon (normal for wide-baseline pairs) its
    affine image splits into two pieces on either side of the line at
    infinity.  Both pieces are recovered by clipping the homogeneous
    polygon against the two w half-spaces; an estimated homography's
    overall sign is arbitrary, so neither side can be discarded a priori.
    Returns the non-empty convex pieces as (N, 2) vertex arrays.

    Raises:
        MaskDegenerateError: the warp collapses to (near) zero total area,
            leaving no usable overlap region.
    """
    M = np.linalg.inv(H.H if isinstance(H, Homography) else np.asarray(H))
    w, h = size_dst
    corners = np.array(
        [[0.0, 0.0, 1.0], [w, 0.0, 1.0], [w, h, 1.0], [0.0, h, 1.0]]
    )
    hom = corners @ M.T
    pieces = [
        p
        for p in (_clip_positive_w(hom), _clip_positive_w(-hom))
        if p is not None
    ]
    total = sum(_polygon_area(p) for p in pieces)
    if total < 1e-8 * size_src[0] * size_src[1]:
        raise MaskDegenerateError(
            f"warped image rectangle has near-zero area ({total:.3g} px^2)"
        )
    return pieces


def _inside_rect(pts: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    w, h = size
    return (
        (pts[:, 0] >= 0)
        & (pts[:, 0] <= w)
        & (pts[:, 1] >= 0)
        & (pts[:, 1] <= h)
    )


def _maps_into_rect(
    M: np.ndarray, pts: np.ndarray, size: tuple[int, int]
) -> np.ndarray:
    """Points whose dehomogenized image under M lands inside the rectangle.

    The test is sign-free (only the ratio matters): being inside the
    projective warp of the other view's rectangle is exactly mapping into
    that rectangle.
    """
    hom = pts @ M[:, :2].T + M[:, 2]
    ws = hom[:, 2]
    ok = np.abs(ws) > _W_CLIP
    mapped = np.zeros_like(pts)
    mapped[ok] = hom[ok, :2] / ws[ok, None]
    return ok & _inside_rect(mapped, size)


def overlap_mask_filter(
    ms: MatchSet,
    H: Homography,
    size_a: tuple[int, int],
    size_b: tuple[int, int],
) -> MatchSet:
    """Keep matches inside the geometric overlap of the two views.

    A match survives iff its A-side point lies inside A's bounds and
    inside the warp of B's image rectangle through H^-1 (tested as
    "maps through H into B's bounds"), and symmetrically for its B-side
    point through H.

    Raises:
        MaskDegenerateError: a warped rectangle collapses to near-zero
            area; the mask would be meaningless.
    """
    # Evaluate both warps up front so a degenerate mask always faults,
    # even when the match list is empty.
    overlap_polygons(H, size_a, size_b)
    overlap_polygons(H.inverse(), size_b, size_a)
    if not ms.matches:
        return replace(ms, matches=())
    pa, pb = ms.points_a(), ms.points_b()
    M = H.H
    keep = (
        _inside_rect(pa, size_a)
        & _inside_rect(pb, size_b)
        & _maps_into_rect(M, pa, size_b)
        & _maps_into_rect(np.linalg.inv(M), pb, size_a)
    )
    kept = tuple(m for m, k in zip(ms.matches, keep) if k)
    return replace(ms, matches=kept)


def assign_to_detections(
    ms: MatchSet,
    dets_a: list[Detection] | tuple[Detection, ...],
    dets_b: list[Detection] | tuple[Detection, ...],
) -> dict[tuple[int, int], list[KeypointMatch]]:
    """Group matches by the detection boxes containing their endpoints.

    A point inside several overlapping boxes contributes to every
    containing box; matches inside no box on either side are dropped.
    Only detection pairs with at least one supporting match appear in the
    result.
    """
    grouped: dict[tuple[int, int], list[KeypointMatch]] = {}
    if not ms.matches:
        return grouped
    pa, pb = ms.points_a(), ms.points_b()
    in_a = [
        (pa[:, 0] >= d.bbox[0])
        & (pa[:, 0] <= d.bbox[2])
        & (pa[:, 1] >= d.bbox[1])
        & (pa[:, 1] <= d.bbox[3])
        for d in dets_a
    ]
    in_b = [
        (pb[:, 0] >= d.bbox[0])
        & (pb[:, 0] <= d.bbox[2])
        & (pb[:, 1] >= d.bbox[1])
        & (pb[:, 1] <= d.bbox[3])
        for d in dets_b
    ]
    for i, mask_a in enumerate(in_a):
        for j, mask_b in enumerate(in_b):
            both = mask_a & mask_b
            if both.any():
                grouped[(i, j)] = [
                    m for m, k in zip(ms.matches, both) if k
                ]
    return grouped
