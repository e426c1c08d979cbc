"""Run matcher jobs and emit match interchange files.

The interchange format is the boundary to the association pipeline: a
header line ``frame=<n> cam_a=<a> cam_b=<b> size_a=<w>x<h> size_b=<w>x<h>``
followed by one ``x_a y_a x_b y_b confidence`` record per match.  Floats
are written with ``repr`` so the downstream loader sees the exact values.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError

from .manifest import ExportJob, JobError
from .matchers import build_matcher

logger = logging.getLogger(__name__)


def match_file_name(frame_id: int, camera_a: int, camera_b: int) -> str:
    return f"matches_f{frame_id:08d}_c{camera_a}_c{camera_b}.txt"


def load_grayscale(path, scale: float) -> torch.Tensor:
    """Read an image as a grayscale float tensor at working resolution.

    Raises:
        JobError: unreadable image, naming the path.
    """
    path = Path(path)
    try:
        with Image.open(path) as im:
            gray = im.convert("L")
            if scale != 1.0:
                gray = gray.resize(
                    (round(gray.width * scale), round(gray.height * scale)),
                    Image.BILINEAR,
                )
            array = np.asarray(gray, dtype=np.float32) / 255.0
    except (OSError, UnidentifiedImageError) as exc:
        raise JobError(f"image not readable: {path}") from exc
    return torch.from_numpy(array)


def write_interchange(
    path,
    frame_id: int,
    camera_a: int,
    camera_b: int,
    size_a: tuple[int, int],
    size_b: tuple[int, int],
    pts_a: np.ndarray,
    pts_b: np.ndarray,
    confidence: np.ndarray,
) -> None:
    lines = [
        f"frame={frame_id} cam_a={camera_a} cam_b={camera_b} "
        f"size_a={size_a[0]}x{size_a[1]} size_b={size_b[0]}x{size_b[1]}"
    ]
    for (xa, ya), (xb, yb), c in zip(pts_a, pts_b, confidence):
        lines.append(
            f"{float(xa)!r} {float(ya)!r} {float(xb)!r} {float(yb)!r} "
            f"{float(min(max(c, 0.0), 1.0))!r}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def export_matches(job: ExportJob, matcher=None) -> list[Path]:
    """Match every image pair in the job and write one file per pair.

    Raises:
        JobError: unreadable image or unavailable weights/backend; the
            message names the offending path.
    """
    if matcher is None:
        matcher = build_matcher(
            job.backend, job.weights, job.device, job.search_radius
        )
    job.output_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for pair in job.pairs:
        img_a = load_grayscale(pair.image_a, job.scale)
        img_b = load_grayscale(pair.image_b, job.scale)
        pts_a, pts_b, conf = matcher.match(img_a, img_b)
        out = job.output_dir / match_file_name(
            pair.frame_id, pair.camera_a, pair.camera_b
        )
        write_interchange(
            out,
            pair.frame_id,
            pair.camera_a,
            pair.camera_b,
            (img_a.shape[1], img_a.shape[0]),
            (img_b.shape[1], img_b.shape[0]),
            pts_a,
            pts_b,
            conf,
        )
        logger.info(
            "frame %d cameras (%d, %d): %d matches -> %s",
            pair.frame_id,
            pair.camera_a,
            pair.camera_b,
            len(conf),
            out,
        )
        written.append(out)
    return written
