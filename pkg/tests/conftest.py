"""Shared rig builders and synthetic-data generators for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from mvassoc.geometry import (
    CameraCalibration,
    apply_homography,
    rotation_to_rvec,
    symmetric_transfer_error,
)


def make_calibration(
    camera_id: int = 1,
    focal: float = 1000.0,
    size: tuple[int, int] = (1280, 720),
    rvec=(0.0, 0.0, 0.0),
    tvec=(0.0, 0.0, 5.0),
) -> CameraCalibration:
    w, h = size
    K = np.array([[focal, 0.0, w / 2.0], [0.0, focal, h / 2.0], [0.0, 0.0, 1.0]])
    return CameraCalibration(camera_id, K, np.asarray(rvec, float), np.asarray(tvec, float), size)


def lookat_rotation(position, target) -> np.ndarray:
    """World-to-camera rotation for a camera at `position` looking at `target`."""
    position = np.asarray(position, float)
    forward = np.asarray(target, float) - position
    forward = forward / np.linalg.norm(forward)
    up = np.array([0.0, 0.0, 1.0])
    right = np.cross(forward, up)
    right = right / np.linalg.norm(right)
    down = np.cross(forward, right)
    return np.vstack([right, down, forward])


def lookat_calibration(
    camera_id: int,
    position,
    target=(0.0, 0.0, 0.9),
    focal: float = 900.0,
    size: tuple[int, int] = (1280, 720),
) -> CameraCalibration:
    R = lookat_rotation(position, target)
    w, h = size
    K = np.array([[focal, 0.0, w / 2.0], [0.0, focal, h / 2.0], [0.0, 0.0, 1.0]])
    return CameraCalibration(
        camera_id, K, rotation_to_rvec(R), -R @ np.asarray(position, float), size
    )


def random_projective_matrix(rng: np.random.Generator) -> np.ndarray:
    """A well-conditioned random homography over the [0, 1000]^2 domain."""
    H = np.array(
        [
            [1.0 + rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(-100, 100)],
            [rng.uniform(-0.3, 0.3), 1.0 + rng.uniform(-0.3, 0.3), rng.uniform(-100, 100)],
            [rng.uniform(-1e-4, 1e-4), rng.uniform(-1e-4, 1e-4), 1.0],
        ]
    )
    return H


def planar_correspondences(rng: np.random.Generator, H: np.ndarray, n: int):
    """n exact correspondences under H with src drawn in [0, 1000]^2."""
    src = rng.uniform(0.0, 1000.0, (n, 2))
    return src, apply_homography(H, src)


def guaranteed_outliers(
    rng: np.random.Generator, H: np.ndarray, n: int, threshold: float
):
    """Random pairs resampled until clearly outside the inlier tolerance."""
    src = np.empty((n, 2))
    dst = np.empty((n, 2))
    for i in range(n):
        while True:
            s = rng.uniform(0.0, 1000.0, 2)
            d = rng.uniform(0.0, 1000.0, 2)
            err = symmetric_transfer_error(H, s[None, :], d[None, :])[0]
            if err > 3.0 * threshold:
                src[i], dst[i] = s, d
                break
    return src, dst


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
