"""Synthetic multi-camera scenes with exact ground truth.

People are vertical segments walking on the ground plane; cameras sit on
a ring around the area looking inward.  Detections are tight boxes around
each person's projected body points, true correspondences are the body
points projected into both views, and clutter correspondences are
mismatched point pairs sampled inside random detection boxes (uniform
clutter would almost never survive the bounding-box grouping stage, so
box-aimed clutter is what actually stresses the thresholds).

The generator writes the same annotation, calibration, and match
interchange formats the loaders read, so synthetic and real data flow
through the pipeline identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .correspondence import KeypointMatch, MatchSet, match_file_name, save_matches
from .dataset import (
    Detection,
    annotation_file_name,
    write_annotation_file,
    write_calibration,
)
from .geometry import CameraCalibration, project_points_masked, rotation_to_rvec

BBOX_PAD_PX = 10.0


@dataclass(frozen=True)
class SceneSpec:
    """Deterministic description of a synthetic scene."""

    n_cameras: int = 2
    n_people: int = 5
    n_frames: int = 20
    area: tuple[tuple[float, float], tuple[float, float]] = ((-4.0, 4.0), (-4.0, 4.0))
    person_height: float = 1.8
    min_separation: float = 1.0  # pedestrians keep their distance, meters
    keypoints_per_person: int = 8
    clutter_rate: float = 0.0
    coord_noise_px: float = 0.0
    true_conf_range: tuple[float, float] = (0.7, 1.0)
    clutter_conf_range: tuple[float, float] = (0.0, 0.5)
    image_size: tuple[int, int] = (1280, 720)
    camera_ring_radius: float = 9.0
    camera_height: float = 5.0
    focal_px: float = 900.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_cameras < 2:
            raise ValueError("need at least 2 cameras")
        if self.n_people < 1 or self.n_frames < 1:
            raise ValueError("need at least one person and one frame")
        if self.keypoints_per_person < 1:
            raise ValueError("need at least one keypoint per person")
        for lo, hi in (self.true_conf_range, self.clutter_conf_range):
            if not (0.0 <= lo <= hi <= 1.0):
                raise ValueError("confidence ranges must lie in [0, 1]")
        if self.clutter_rate < 0 or self.coord_noise_px < 0:
            raise ValueError("rates and noise must be nonnegative")


@dataclass(frozen=True)
class SyntheticFrame:
    frame_id: int
    detections: dict[int, tuple[Detection, ...]]  # camera -> sorted by person
    match_sets: dict[tuple[int, int], MatchSet]


@dataclass(frozen=True)
class SyntheticScene:
    spec: SceneSpec
    calibrations: dict[int, CameraCalibration]
    frames: list[SyntheticFrame]

    def camera_pairs(self) -> list[tuple[int, int]]:
        ids = sorted(self.calibrations)
        return [(a, b) for i, a in enumerate(ids) for b in ids[i + 1 :]]

    def co_visible(
        self, frame_id: int, camera_a: int, camera_b: int
    ) -> set[int]:
        """Ground-truth person ids detected in both cameras of a frame."""
        frame = self.frames[frame_id]
        ids_a = {d.person_id for d in frame.detections.get(camera_a, ())}
        ids_b = {d.person_id for d in frame.detections.get(camera_b, ())}
        return ids_a & ids_b


def _ring_camera(
    spec: SceneSpec, camera_id: int, angle: float
) -> CameraCalibration:
    position = np.array(
        [
            spec.camera_ring_radius * math.cos(angle),
            spec.camera_ring_radius * math.sin(angle),
            spec.camera_height,
        ]
    )
    target = np.array([0.0, 0.0, 0.9])
    forward = target - position
    forward /= np.linalg.norm(forward)
    up = np.array([0.0, 0.0, 1.0])
    right = np.cross(forward, up)
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    R = np.vstack([right, down, forward])
    w, h = spec.image_size
    K = np.array(
        [
            [spec.focal_px, 0.0, w / 2.0],
            [0.0, spec.focal_px, h / 2.0],
            [0.0, 0.0, 1.0],
        ]
    )
    return CameraCalibration(
        camera_id=camera_id,
        K=K,
        rvec=rotation_to_rvec(R),
        tvec=-R @ position,
        image_size=spec.image_size,
    )


def _separate(pos: np.ndarray, d_min: float) -> None:
    """Push pedestrian pairs apart until none is closer than d_min."""
    n = len(pos)
    for _ in range(8):
        moved = False
        for i in range(n):
            for j in range(i + 1, n):
                delta = pos[j] - pos[i]
                dist = float(np.hypot(*delta))
                if dist >= d_min:
                    continue
                moved = True
                if dist < 1e-9:
                    delta = np.array([1.0, 0.0])
                    dist = 1.0
                push = 0.5 * (d_min - dist) / dist
                pos[i] -= delta * push
                pos[j] += delta * push
        if not moved:
            return


def _walk(spec: SceneSpec, rng: np.random.Generator) -> np.ndarray:
    """(n_frames, n_people, 2) ground positions, reflected at area bounds."""
    (x0, x1), (y0, y1) = spec.area
    pos = np.column_stack(
        [
            rng.uniform(x0 + 0.3, x1 - 0.3, spec.n_people),
            rng.uniform(y0 + 0.3, y1 - 0.3, spec.n_people),
        ]
    )
    out = np.empty((spec.n_frames, spec.n_people, 2))
    for f in range(spec.n_frames):
        _separate(pos, spec.min_separation)
        for axis, (lo, hi) in enumerate(((x0, x1), (y0, y1))):
            np.clip(pos[:, axis], lo, hi, out=pos[:, axis])
        out[f] = pos
        step = rng.normal(0.0, 0.25, size=pos.shape)
        pos = pos + step
        for axis, (lo, hi) in enumerate(((x0, x1), (y0, y1))):
            below = pos[:, axis] < lo
            above = pos[:, axis] > hi
            pos[below, axis] = 2 * lo - pos[below, axis]
            pos[above, axis] = 2 * hi - pos[above, axis]
            np.clip(pos[:, axis], lo, hi, out=pos[:, axis])
    return out


def _keypoints(
    spec: SceneSpec, center: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Body points for one person at one frame: (k, 3) world coordinates."""
    k = spec.keypoints_per_person
    heights = np.linspace(0.15, 1.0, k) * spec.person_height
    lateral = rng.uniform(-0.15, 0.15, size=(k, 2))
    return np.column_stack(
        [center[0] + lateral[:, 0], center[1] + lateral[:, 1], heights]
    )


def _conf(rng: np.random.Generator, lo: float, hi: float) -> float:
    return float(lo if lo == hi else rng.uniform(lo, hi))


def generate_scene(spec: SceneSpec) -> SyntheticScene:
    """Build cameras, walks, detections, and correspondences from a seed.

    Raises:
        ValueError: camera placement leaves some camera pair without a
            single co-visible person across the whole scene.
    """
    rng = np.random.default_rng(spec.seed)
    calibrations = {}
    for i in range(spec.n_cameras):
        angle = 0.4 + 2.0 * math.pi * i / spec.n_cameras
        calibrations[i + 1] = _ring_camera(spec, i + 1, angle)
    walk = _walk(spec, rng)
    w, h = spec.image_size

    frames: list[SyntheticFrame] = []
    pairs = [
        (a, b)
        for i, a in enumerate(sorted(calibrations))
        for b in sorted(calibrations)[i + 1 :]
    ]
    pair_hit = {p: False for p in pairs}
    for f in range(spec.n_frames):
        body = {
            pid: _keypoints(spec, walk[f, pid], rng)
            for pid in range(spec.n_people)
        }
        projections: dict[tuple[int, int], np.ndarray] = {}
        detections: dict[int, tuple[Detection, ...]] = {}
        for cam_id, calib in calibrations.items():
            dets = []
            for pid in range(spec.n_people):
                pix, in_front = project_points_masked(body[pid], calib)
                inside = (
                    in_front
                    & (pix[:, 0] >= 0)
                    & (pix[:, 0] < w)
                    & (pix[:, 1] >= 0)
                    & (pix[:, 1] < h)
                )
                if not inside.all():
                    continue
                projections[(cam_id, pid)] = pix
                xmin = max(0.0, float(pix[:, 0].min()) - BBOX_PAD_PX)
                xmax = min(float(w), float(pix[:, 0].max()) + BBOX_PAD_PX)
                ymin = max(0.0, float(pix[:, 1].min()) - BBOX_PAD_PX)
                ymax = min(float(h), float(pix[:, 1].max()) + BBOX_PAD_PX)
                dets.append(
                    Detection(
                        frame_id=f,
                        camera_id=cam_id,
                        person_id=pid,
                        bbox=(xmin, ymin, xmax, ymax),
                    )
                )
            detections[cam_id] = tuple(sorted(dets, key=lambda d: d.person_id))

        match_sets: dict[tuple[int, int], MatchSet] = {}
        for a, b in pairs:
            matches: list[KeypointMatch] = []
            ids_a = {d.person_id for d in detections[a]}
            ids_b = {d.person_id for d in detections[b]}
            for pid in sorted(ids_a & ids_b):
                pair_hit[(a, b)] = True
                pa = projections[(a, pid)].copy()
                pb = projections[(b, pid)].copy()
                if spec.coord_noise_px > 0:
                    pa += rng.normal(0.0, spec.coord_noise_px, pa.shape)
                    pb += rng.normal(0.0, spec.coord_noise_px, pb.shape)
                for row_a, row_b in zip(pa, pb):
                    matches.append(
                        KeypointMatch(
                            (float(row_a[0]), float(row_a[1])),
                            (float(row_b[0]), float(row_b[1])),
                            _conf(rng, *spec.true_conf_range),
                        )
                    )
            n_clutter = int(rng.poisson(spec.clutter_rate))
            for _ in range(n_clutter):
                pt = []
                for dets in (detections[a], detections[b]):
                    if dets:
                        det = dets[int(rng.integers(len(dets)))]
                        xmin, ymin, xmax, ymax = det.bbox
                        pt.append(
                            (
                                float(rng.uniform(xmin, xmax)),
                                float(rng.uniform(ymin, ymax)),
                            )
                        )
                    else:
                        pt.append(
                            (
                                float(rng.uniform(0, w)),
                                float(rng.uniform(0, h)),
                            )
                        )
                matches.append(
                    KeypointMatch(
                        pt[0], pt[1], _conf(rng, *spec.clutter_conf_range)
                    )
                )
            match_sets[(a, b)] = MatchSet(
                frame_id=f,
                camera_a=a,
                camera_b=b,
                matches=tuple(matches),
                provenance="synthetic",
                size_a=spec.image_size,
                size_b=spec.image_size,
            )
        frames.append(SyntheticFrame(f, detections, match_sets))

    missing = [p for p, hit in pair_hit.items() if not hit]
    if missing:
        raise ValueError(
            f"camera placement yields zero overlap for pairs {missing}"
        )
    return SyntheticScene(spec, calibrations, frames)


def write_scene(scene: SyntheticScene, outdir) -> dict[str, Path]:
    """Write calibration, annotation, and match files for the whole scene."""
    outdir = Path(outdir)
    calib_dir = outdir / "calibrations"
    ann_dir = outdir / "annotations"
    match_dir = outdir / "matches"
    for d in (calib_dir, ann_dir, match_dir):
        d.mkdir(parents=True, exist_ok=True)
    for cam_id, calib in scene.calibrations.items():
        write_calibration(
            calib_dir / f"intr_cam{cam_id}.xml",
            calib_dir / f"extr_cam{cam_id}.xml",
            calib,
        )
    for frame in scene.frames:
        dets = [d for cam in sorted(frame.detections) for d in frame.detections[cam]]
        write_annotation_file(ann_dir / annotation_file_name(frame.frame_id), dets)
        for (a, b), ms in sorted(frame.match_sets.items()):
            save_matches(match_dir / match_file_name(frame.frame_id, a, b), ms)
    return {
        "calibrations": calib_dir,
        "annotations": ann_dir,
        "matches": match_dir,
    }
