"""Pinhole cameras, ground-grid generation, and homography estimation.

World coordinates are meters; pixel coordinates have the origin at the
top-left image corner.  Rotations follow the computer-vision convention
(camera X right, Y down, Z forward), encoded extrinsically as Rodrigues
vectors: a point X in world coordinates maps to ``R @ X + t`` in the
camera frame.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import EstimationError, NoOverlapError, PointAtInfinityError

logger = logging.getLogger(__name__)

DEPTH_EPS = 1e-9
INFINITY_EPS = 1e-12


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CameraCalibration:
    """Intrinsics plus Rodrigues-encoded extrinsics for one camera.

    Attributes:
        camera_id: small integer identifying the camera (1-based in the
            seven-camera dataset).
        K: 3x3 upper-triangular intrinsic matrix in pixels, K[2, 2] == 1.
        rvec: Rodrigues rotation vector, radians.
        tvec: translation, world units (meters).
        image_size: (width, height) in pixels.
    """

    camera_id: int
    K: np.ndarray
    rvec: np.ndarray
    tvec: np.ndarray
    image_size: tuple[int, int]

    def __post_init__(self) -> None:
        K = np.asarray(self.K, dtype=float)
        if K.shape != (3, 3):
            raise ValueError(f"K must be 3x3, got shape {K.shape}")
        if not np.all(np.isfinite(K)):
            raise ValueError("K contains non-finite entries")
        tol = 1e-9 * max(1.0, float(np.abs(K).max()))
        if abs(K[2, 2] - 1.0) > tol:
            raise ValueError(f"K[2,2] must be 1, got {K[2, 2]!r}")
        lower = np.array([K[1, 0], K[2, 0], K[2, 1]])
        if np.any(np.abs(lower) > tol):
            raise ValueError("K must be upper-triangular")
        if K[0, 0] <= 0 or K[1, 1] <= 0:
            raise ValueError("focal entries must be positive")
        rvec = np.asarray(self.rvec, dtype=float).reshape(3)
        tvec = np.asarray(self.tvec, dtype=float).reshape(3)
        if not (np.all(np.isfinite(rvec)) and np.all(np.isfinite(tvec))):
            raise ValueError("extrinsics contain non-finite entries")
        w, h = self.image_size
        if w <= 0 or h <= 0:
            raise ValueError(f"image_size must be positive, got {self.image_size}")
        object.__setattr__(self, "K", _readonly(K))
        object.__setattr__(self, "rvec", _readonly(rvec))
        object.__setattr__(self, "tvec", _readonly(tvec))
        object.__setattr__(self, "image_size", (int(w), int(h)))

    @property
    def rotation(self) -> np.ndarray:
        return rodrigues(self.rvec)


@dataclass(frozen=True)
class GroundGrid:
    """Regular grid of 3D points on a horizontal plane.

    The default values reproduce the seven-camera dataset's ground grid:
    480x1440 cells at 2.5 cm spacing from origin (-3.0, -9.0), with the
    plane lifted to ``z_units`` grid units (40 units -> 1.0 m).
    """

    rows: int = 1440
    cols: int = 480
    spacing: float = 0.025
    origin: tuple[float, float] = (-3.0, -9.0)
    z_units: int = 40

    @property
    def elevation(self) -> float:
        """Plane height in meters."""
        return self.spacing * self.z_units

    @property
    def point_count(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True, eq=False)
class Homography:
    """3x3 projective map from one camera's pixels to another's.

    Normalized so H[2, 2] == 1 whenever that entry is nonzero.
    """

    H: np.ndarray
    inlier_count: int = 0
    src_camera: int | None = None
    dst_camera: int | None = None

    def __post_init__(self) -> None:
        H = np.asarray(self.H, dtype=float)
        if H.shape != (3, 3):
            raise ValueError(f"H must be 3x3, got shape {H.shape}")
        if not np.all(np.isfinite(H)):
            raise ValueError("H contains non-finite entries")
        sv = np.linalg.svd(H, compute_uv=False)
        if sv[0] == 0 or sv[-1] / sv[0] < 1e-13:
            raise ValueError("H is singular")
        if abs(H[2, 2]) > INFINITY_EPS:
            H = H / H[2, 2]
        if self.inlier_count < 0:
            raise ValueError("inlier_count must be nonnegative")
        object.__setattr__(self, "H", _readonly(H))

    def inverse(self) -> "Homography":
        return Homography(
            np.linalg.inv(self.H),
            inlier_count=self.inlier_count,
            src_camera=self.dst_camera,
            dst_camera=self.src_camera,
        )


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array(
        [[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]]
    )


def rodrigues(rvec) -> np.ndarray:
    """Rotation matrix for an axis-angle vector (axis rvec/|rvec|, angle |rvec|).

    Uses the sinc-form expansion, so the zero vector maps to the identity
    without a special case in the caller.
    """
    r = np.asarray(rvec, dtype=float).reshape(3)
    if not np.all(np.isfinite(r)):
        raise ValueError("rvec contains non-finite components")
    theta2 = float(r @ r)
    theta = math.sqrt(theta2)
    if theta < 1e-4:
        # Taylor forms of sin(t)/t and (1-cos t)/t^2; exact to O(t^6).
        a = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0
        b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0
    else:
        a = math.sin(theta) / theta
        b = (1.0 - math.cos(theta)) / theta2
    K = _skew(r)
    return np.eye(3) + a * K + b * (K @ K)


def rotation_to_rvec(R) -> np.ndarray:
    """Axis-angle vector of a rotation matrix (inverse of :func:`rodrigues`).

    Stable over the full angle range, including near 0 and near pi.
    """
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        raise ValueError(f"R must be 3x3, got shape {R.shape}")
    vee = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    s = 0.5 * float(np.linalg.norm(vee))
    c = 0.5 * (float(np.trace(R)) - 1.0)
    c = min(1.0, max(-1.0, c))
    theta = math.atan2(s, c)
    if theta < 1e-7:
        return vee / 2.0
    if theta < 3.0:
        return vee * (theta / (2.0 * math.sin(theta)))
    # Near pi the vee part loses the axis; recover it from the symmetric
    # part, which stays well-conditioned there.
    outer = ((R + R.T) / 2.0 - c * np.eye(3)) / (1.0 - c)
    k = int(np.argmax(np.diag(outer)))
    axis = outer[:, k] / math.sqrt(max(outer[k, k], 1e-300))
    dot = float(axis @ vee)
    if dot < 0.0:
        axis = -axis
    elif dot == 0.0 and axis[int(np.argmax(np.abs(axis)))] < 0:
        axis = -axis  # angle exactly pi: pick the canonical sign
    return theta * (axis / np.linalg.norm(axis))


def project_points_masked(points, calib: CameraCalibration):
    """Project 3D world points through a pinhole camera.

    Returns:
        (pixels, in_front): an (N, 2) array of pixel coordinates and the
        boolean mask of points with positive camera-frame depth.  Rows of
        ``pixels`` where ``in_front`` is False are NaN.
    """
    X = np.asarray(points, dtype=float).reshape(-1, 3)
    R = rodrigues(calib.rvec)
    Xc = X @ R.T + calib.tvec
    z = Xc[:, 2]
    in_front = z > DEPTH_EPS
    uvw = Xc @ calib.K.T
    pixels = np.full((len(X), 2), np.nan)
    pixels[in_front] = uvw[in_front, :2] / uvw[in_front, 2:3]
    return pixels, in_front


def project_points(points, calib: CameraCalibration) -> np.ndarray:
    """Project 3D points, dropping those behind the camera.

    Returns an (M, 2) array, M <= N; non-positive-depth points are
    filtered rather than faulted.
    """
    pixels, in_front = project_points_masked(points, calib)
    return pixels[in_front]


def generate_ground_grid(grid: GroundGrid = GroundGrid()) -> np.ndarray:
    """All grid points as an (rows*cols, 3) array, x varying fastest."""
    if grid.rows <= 0 or grid.cols <= 0:
        raise ValueError(f"grid must be non-empty, got {grid.rows}x{grid.cols}")
    x = grid.origin[0] + grid.spacing * np.arange(grid.cols)
    y = grid.origin[1] + grid.spacing * np.arange(grid.rows)
    xx, yy = np.meshgrid(x, y)  # shape (rows, cols)
    pts = np.column_stack(
        [xx.ravel(), yy.ravel(), np.full(grid.point_count, grid.elevation)]
    )
    return pts


def _as_matrix(H) -> np.ndarray:
    if isinstance(H, Homography):
        return H.H
    return np.asarray(H, dtype=float)


def apply_homography(H, points) -> np.ndarray:
    """Map (N, 2) points through a homography; points at infinity become inf."""
    M = _as_matrix(H)
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    q = p @ M[:, :2].T + M[:, 2]
    w = q[:, 2]
    out = np.full((len(p), 2), np.inf)
    ok = np.abs(w) > INFINITY_EPS
    out[ok] = q[ok, :2] / w[ok, None]
    return out


def project_point_h(H, point) -> tuple[float, float]:
    """Map a single point through a homography.

    Raises:
        PointAtInfinityError: if the homogeneous scale vanishes.
    """
    M = _as_matrix(H)
    x, y = float(point[0]), float(point[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValueError(f"point must be finite, got {(x, y)}")
    q = M @ (x, y, 1.0)
    if abs(q[2]) < INFINITY_EPS:
        raise PointAtInfinityError(f"point {(x, y)} maps to infinity")
    return (q[0] / q[2], q[1] / q[2])


def symmetric_transfer_error(H, src, dst) -> np.ndarray:
    """Per-correspondence sqrt(forward^2 + backward^2) transfer error, pixels."""
    M = _as_matrix(H)
    fwd = apply_homography(M, src) - np.asarray(dst, dtype=float)
    bwd = apply_homography(np.linalg.inv(M), dst) - np.asarray(src, dtype=float)
    with np.errstate(invalid="ignore"):
        e2 = np.sum(fwd * fwd, axis=1) + np.sum(bwd * bwd, axis=1)
    return np.sqrt(np.where(np.isnan(e2), np.inf, e2))


def _normalize_points(pts: np.ndarray):
    """Hartley normalization: centroid to origin, mean distance sqrt(2)."""
    centroid = pts.mean(axis=0)
    d = np.linalg.norm(pts - centroid, axis=1).mean()
    if d < 1e-12:
        raise EstimationError("correspondences are coincident")
    s = math.sqrt(2.0) / d
    T = np.array(
        [[s, 0.0, -s * centroid[0]], [0.0, s, -s * centroid[1]], [0.0, 0.0, 1.0]]
    )
    return (pts - centroid) * s, T


def dlt_homography(src, dst) -> np.ndarray:
    """Least-squares homography from >= 4 correspondences (normalized DLT).

    Raises:
        EstimationError: fewer than 4 points or a degenerate configuration.
    """
    src = np.asarray(src, dtype=float).reshape(-1, 2)
    dst = np.asarray(dst, dtype=float).reshape(-1, 2)
    n = len(src)
    if n != len(dst):
        raise ValueError("src and dst must be index-aligned")
    if n < 4:
        raise EstimationError(f"need at least 4 correspondences, got {n}")
    sn, Ts = _normalize_points(src)
    dn, Td = _normalize_points(dst)
    A = np.zeros((2 * n, 9))
    xs, ys = sn[:, 0], sn[:, 1]
    xd, yd = dn[:, 0], dn[:, 1]
    A[0::2, 0] = xs
    A[0::2, 1] = ys
    A[0::2, 2] = 1.0
    A[0::2, 6] = -xd * xs
    A[0::2, 7] = -xd * ys
    A[0::2, 8] = -xd
    A[1::2, 3] = xs
    A[1::2, 4] = ys
    A[1::2, 5] = 1.0
    A[1::2, 6] = -yd * xs
    A[1::2, 7] = -yd * ys
    A[1::2, 8] = -yd
    if n <= 4096:
        _, _, Vt = np.linalg.svd(A)
        h = Vt[-1]
    else:
        # Tall systems: the 9x9 Gram matrix is far cheaper and the Hartley
        # normalization keeps its conditioning adequate.
        _, vecs = np.linalg.eigh(A.T @ A)
        h = vecs[:, 0]
    Hn = h.reshape(3, 3)
    H = np.linalg.inv(Td) @ Hn @ Ts
    sv = np.linalg.svd(H, compute_uv=False)
    if sv[0] == 0 or sv[-1] / sv[0] < 1e-13:
        raise EstimationError("degenerate correspondence configuration")
    return H / H[2, 2] if abs(H[2, 2]) > INFINITY_EPS else H


def _sample_degenerate(pts: np.ndarray) -> bool:
    """True when any 3 of the 4 sample points are (nearly) collinear."""
    span = max(np.ptp(pts, axis=0).max(), 1.0)
    tol = 1e-8 * span * span
    for skip in range(4):
        tri = np.delete(pts, skip, axis=0)
        area = abs(
            (tri[1, 0] - tri[0, 0]) * (tri[2, 1] - tri[0, 1])
            - (tri[2, 0] - tri[0, 0]) * (tri[1, 1] - tri[0, 1])
        )
        if area <= tol:
            return True
    return False


def estimate_homography_ransac(
    src,
    dst,
    threshold_px: float = 10.0,
    max_iters: int = 2000,
    seed: int = 0,
    confidence: float = 0.999,
    src_camera: int | None = None,
    dst_camera: int | None = None,
) -> Homography:
    """Robust homography fit over 4-point DLT samples.

    Inliers are correspondences whose symmetric transfer error is at most
    ``threshold_px``; the final matrix is re-estimated by normalized DLT
    over the best consensus set.  Deterministic for a given seed: the
    iteration count adapts to the observed inlier ratio (at ``confidence``)
    but never exceeds ``max_iters``.

    Raises:
        EstimationError: fewer than 4 correspondences, or every sampled
            configuration degenerate.
    """
    src = np.asarray(src, dtype=float).reshape(-1, 2)
    dst = np.asarray(dst, dtype=float).reshape(-1, 2)
    n = len(src)
    if n != len(dst):
        raise ValueError("src and dst must be index-aligned")
    if n < 4:
        raise EstimationError(f"need at least 4 correspondences, got {n}")
    rng = np.random.default_rng(seed)
    best_H = None
    best_mask = None
    best_count = 0
    best_err = math.inf
    needed = max_iters
    it = 0
    while it < min(needed, max_iters):
        it += 1
        idx = rng.choice(n, size=4, replace=False)
        if _sample_degenerate(src[idx]) or _sample_degenerate(dst[idx]):
            continue
        try:
            H = dlt_homography(src[idx], dst[idx])
        except EstimationError:
            continue
        err = symmetric_transfer_error(H, src, dst)
        mask = err <= threshold_px
        count = int(mask.sum())
        if count == 0:
            continue
        mean_err = float(err[mask].mean())
        if count > best_count or (count == best_count and mean_err < best_err):
            best_H, best_mask = H, mask
            best_count, best_err = count, mean_err
            w = count / n
            if w >= 1.0:
                needed = it
            else:
                needed = min(
                    max_iters,
                    math.ceil(math.log(1.0 - confidence) / math.log(1.0 - w**4)),
                )
    if best_H is None:
        raise EstimationError(
            "no consensus: every sampled 4-point configuration was degenerate"
        )
    if best_count >= 4:
        try:
            best_H = dlt_homography(src[best_mask], dst[best_mask])
        except EstimationError:
            logger.warning("consensus re-fit degenerate; keeping sample fit")
        err = symmetric_transfer_error(best_H, src, dst)
        best_count = int((err <= threshold_px).sum())
    return Homography(
        best_H,
        inlier_count=best_count,
        src_camera=src_camera,
        dst_camera=dst_camera,
    )


def compute_pair_homography(
    calib_a: CameraCalibration,
    calib_b: CameraCalibration,
    grid: GroundGrid = GroundGrid(),
    threshold_px: float = 10.0,
    max_iters: int = 2000,
    seed: int = 0,
) -> Homography:
    """Homography from camera A pixels to camera B pixels via the grid plane.

    Grid points are kept only when both projections land strictly inside
    the respective image bounds with positive depth.

    Raises:
        NoOverlapError: fewer than 4 co-visible grid points.
    """
    pts = generate_ground_grid(grid)
    pix_a, front_a = project_points_masked(pts, calib_a)
    pix_b, front_b = project_points_masked(pts, calib_b)
    wa, ha = calib_a.image_size
    wb, hb = calib_b.image_size
    with np.errstate(invalid="ignore"):
        keep = (
            front_a
            & front_b
            & (pix_a[:, 0] >= 0)
            & (pix_a[:, 0] < wa)
            & (pix_a[:, 1] >= 0)
            & (pix_a[:, 1] < ha)
            & (pix_b[:, 0] >= 0)
            & (pix_b[:, 0] < wb)
            & (pix_b[:, 1] >= 0)
            & (pix_b[:, 1] < hb)
        )
    count = int(keep.sum())
    if count < 4:
        raise NoOverlapError(
            f"cameras {calib_a.camera_id} and {calib_b.camera_id} share only "
            f"{count} co-visible grid points"
        )
    return estimate_homography_ransac(
        pix_a[keep],
        pix_b[keep],
        threshold_px=threshold_px,
        max_iters=max_iters,
        seed=seed,
        src_camera=calib_a.camera_id,
        dst_camera=calib_b.camera_id,
    )


def scale_calibration(calib: CameraCalibration, s: float) -> CameraCalibration:
    """Rescale intrinsics for resampled frames; extrinsics are untouched."""
    if s <= 0:
        raise ValueError(f"scale must be positive, got {s}")
    S = np.diag([s, s, 1.0])
    w, h = calib.image_size
    return CameraCalibration(
        camera_id=calib.camera_id,
        K=S @ calib.K,
        rvec=calib.rvec,
        tvec=calib.tvec,
        image_size=(int(round(w * s)), int(round(h * s))),
    )
