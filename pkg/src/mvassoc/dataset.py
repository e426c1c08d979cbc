"""Ingest calibrations and bounding-box annotations; pair synchronized frames.

File schemas (shared with the synthetic generator, which writes them):

* Calibrations: XML key-value storage.  The intrinsic file carries a
  ``camera_matrix`` node (3x3, ``rows``/``cols``/``data`` children);
  ``distortion_coefficients`` is ignored when present.  The extrinsic file
  carries ``rvec`` and ``tvec`` nodes, either as plain whitespace-separated
  triples or in the same matrix layout.  Optional ``image_width`` /
  ``image_height`` nodes override the caller-supplied native size.
* Annotations: one JSON file per frame holding an array of person records,
  each with a ``personID`` and per-camera ``views`` records carrying
  ``viewNum`` (0-based; camera_id = viewNum + 1) and pixel
  ``xmin``/``ymin``/``xmax``/``ymax``.  A view whose four coordinates are
  all -1, or whose extent is not positive, marks the person invisible in
  that camera and produces no detection.
"""

from __future__ import annotations

import json
import logging
import math
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import AnnotationError, CalibrationError
from .geometry import CameraCalibration

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Detection:
    """One person bounding box in one camera at one frame."""

    frame_id: int
    camera_id: int
    person_id: int
    bbox: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax

    def __post_init__(self) -> None:
        xmin, ymin, xmax, ymax = self.bbox
        if not all(math.isfinite(v) for v in self.bbox):
            raise ValueError(f"bbox must be finite, got {self.bbox}")
        if not (xmin < xmax and ymin < ymax):
            raise ValueError(f"bbox must have positive extent, got {self.bbox}")

    def contains(self, x: float, y: float) -> bool:
        """Closed-interval containment test."""
        xmin, ymin, xmax, ymax = self.bbox
        return xmin <= x <= xmax and ymin <= y <= ymax


@dataclass(frozen=True)
class FramePair:
    """Detections of one synchronized frame in two cameras."""

    frame_id: int
    camera_a: int
    camera_b: int
    detections_a: tuple[Detection, ...]
    detections_b: tuple[Detection, ...]
    image_a: str | None = None
    image_b: str | None = None

    def __post_init__(self) -> None:
        if self.camera_a == self.camera_b:
            raise ValueError("camera_a and camera_b must differ")
        for det in (*self.detections_a, *self.detections_b):
            if det.frame_id != self.frame_id:
                raise ValueError(
                    f"detection frame {det.frame_id} != pair frame {self.frame_id}"
                )


def _parse_matrix_node(node: ET.Element, name: str) -> np.ndarray:
    data = node.find("data")
    if data is not None:
        try:
            values = [float(v) for v in data.text.split()]
            rows = int(node.findtext("rows", "0"))
            cols = int(node.findtext("cols", "0"))
        except (TypeError, ValueError) as exc:
            raise CalibrationError(f"malformed field {name!r}: {exc}") from exc
        if rows * cols != len(values):
            raise CalibrationError(
                f"field {name!r}: {rows}x{cols} header does not match "
                f"{len(values)} values"
            )
        return np.array(values).reshape(rows, cols)
    try:
        return np.array([float(v) for v in (node.text or "").split()])
    except ValueError as exc:
        raise CalibrationError(f"malformed field {name!r}: {exc}") from exc


def _find_field(root: ET.Element, names: Sequence[str], path: Path) -> ET.Element:
    for name in names:
        node = root.find(f".//{name}")
        if node is not None:
            return node
    raise CalibrationError(f"{path}: missing field {names[0]!r}")


def load_calibrations(
    intrinsic_path,
    extrinsic_path,
    camera_id: int,
    image_size: tuple[int, int] = (1920, 1080),
) -> CameraCalibration:
    """Read one camera's intrinsic and extrinsic XML files.

    ``image_size`` is the native frame size; it is overridden when the
    intrinsic file carries ``image_width``/``image_height`` nodes (the
    stock seven-camera files do not).
    """
    intrinsic_path = Path(intrinsic_path)
    extrinsic_path = Path(extrinsic_path)
    for p in (intrinsic_path, extrinsic_path):
        if not p.is_file():
            raise CalibrationError(f"calibration file not found: {p}")
        try:
            ET.parse(p)
        except ET.ParseError as exc:
            raise CalibrationError(f"{p}: not valid XML: {exc}") from exc

    intr = ET.parse(intrinsic_path).getroot()
    extr = ET.parse(extrinsic_path).getroot()

    K = _parse_matrix_node(
        _find_field(intr, ["camera_matrix"], intrinsic_path), "camera_matrix"
    )
    if K.shape != (3, 3):
        raise CalibrationError(
            f"{intrinsic_path}: camera_matrix is {K.shape}, expected 3x3"
        )
    rvec = _parse_matrix_node(
        _find_field(extr, ["rvec", "rotation_vector"], extrinsic_path), "rvec"
    ).reshape(-1)
    tvec = _parse_matrix_node(
        _find_field(extr, ["tvec", "translation_vector"], extrinsic_path), "tvec"
    ).reshape(-1)
    if rvec.size != 3:
        raise CalibrationError(f"{extrinsic_path}: rvec has {rvec.size} values")
    if tvec.size != 3:
        raise CalibrationError(f"{extrinsic_path}: tvec has {tvec.size} values")

    width = intr.findtext(".//image_width")
    height = intr.findtext(".//image_height")
    if width is not None and height is not None:
        image_size = (int(width), int(height))

    try:
        return CameraCalibration(
            camera_id=camera_id, K=K, rvec=rvec, tvec=tvec, image_size=image_size
        )
    except ValueError as exc:
        raise CalibrationError(f"{intrinsic_path}: {exc}") from exc


def write_calibration(
    intrinsic_path, extrinsic_path, calib: CameraCalibration
) -> None:
    """Write a calibration in the XML schema accepted by ``load_calibrations``."""

    def matrix_xml(name: str, values: np.ndarray, rows: int, cols: int) -> str:
        flat = " ".join(repr(float(v)) for v in np.asarray(values).ravel())
        return (
            f'  <{name} type_id="opencv-matrix">\n'
            f"    <rows>{rows}</rows>\n    <cols>{cols}</cols>\n"
            f"    <dt>d</dt>\n    <data>{flat}</data>\n  </{name}>\n"
        )

    w, h = calib.image_size
    intr = (
        '<?xml version="1.0"?>\n<opencv_storage>\n'
        + matrix_xml("camera_matrix", calib.K, 3, 3)
        + matrix_xml("distortion_coefficients", np.zeros(5), 5, 1)
        + f"  <image_width>{w}</image_width>\n"
        + f"  <image_height>{h}</image_height>\n"
        + "</opencv_storage>\n"
    )
    extr = (
        '<?xml version="1.0"?>\n<opencv_storage>\n'
        + "  <rvec>"
        + " ".join(repr(float(v)) for v in calib.rvec)
        + "</rvec>\n  <tvec>"
        + " ".join(repr(float(v)) for v in calib.tvec)
        + "</tvec>\n</opencv_storage>\n"
    )
    Path(intrinsic_path).write_text(intr, encoding="utf-8")
    Path(extrinsic_path).write_text(extr, encoding="utf-8")


def _view_invisible(coords: tuple[float, float, float, float]) -> bool:
    xmin, ymin, xmax, ymax = coords
    if all(v == -1 for v in coords):
        return True
    return xmax - xmin <= 0 or ymax - ymin <= 0


def load_annotations(
    path,
    frame_id: int,
    scale: float = 1.0,
    image_size: tuple[int, int] = (1280, 720),
) -> list[Detection]:
    """Read one frame's annotation file into per-camera detections.

    Coordinates are multiplied by ``scale`` and clipped to the working
    ``image_size`` bounds; boxes degenerate after clipping are dropped
    with a warning.
    """
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    path = Path(path)
    if not path.is_file():
        raise AnnotationError(f"annotation file not found: {path}")
    try:
        records = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise AnnotationError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(records, list):
        raise AnnotationError(f"{path}: expected a top-level array")

    W, H = image_size
    detections: list[Detection] = []
    seen: set[tuple[int, int]] = set()
    for i, rec in enumerate(records):
        try:
            person_id = int(rec["personID"])
            views = rec["views"]
        except (TypeError, KeyError, ValueError) as exc:
            raise AnnotationError(f"{path}: record {i} malformed: {exc}") from exc
        for view in views:
            try:
                camera_id = int(view["viewNum"]) + 1
                coords = tuple(
                    float(view[k]) for k in ("xmin", "ymin", "xmax", "ymax")
                )
            except (TypeError, KeyError, ValueError) as exc:
                raise AnnotationError(
                    f"{path}: record {i} malformed view: {exc}"
                ) from exc
            if _view_invisible(coords):
                continue
            if (person_id, camera_id) in seen:
                raise AnnotationError(
                    f"{path}: record {i}: person {person_id} appears twice "
                    f"in camera {camera_id}"
                )
            seen.add((person_id, camera_id))
            xmin, ymin, xmax, ymax = (v * scale for v in coords)
            xmin, xmax = max(0.0, xmin), min(float(W), xmax)
            ymin, ymax = max(0.0, ymin), min(float(H), ymax)
            if xmax - xmin <= 0 or ymax - ymin <= 0:
                logger.warning(
                    "%s: record %d camera %d: box degenerate after clipping, "
                    "dropped",
                    path,
                    i,
                    camera_id,
                )
                continue
            detections.append(
                Detection(
                    frame_id=frame_id,
                    camera_id=camera_id,
                    person_id=person_id,
                    bbox=(xmin, ymin, xmax, ymax),
                )
            )
    return detections


def write_annotation_file(path, detections: Sequence[Detection]) -> None:
    """Write one frame's detections in the schema read by ``load_annotations``."""
    by_person: dict[int, list[Detection]] = {}
    for det in detections:
        by_person.setdefault(det.person_id, []).append(det)
    records = []
    for person_id in sorted(by_person):
        views = [
            {
                "viewNum": det.camera_id - 1,
                "xmin": det.bbox[0],
                "ymin": det.bbox[1],
                "xmax": det.bbox[2],
                "ymax": det.bbox[3],
            }
            for det in sorted(by_person[person_id], key=lambda d: d.camera_id)
        ]
        records.append({"personID": person_id, "views": views})
    Path(path).write_text(json.dumps(records, indent=1), encoding="utf-8")


def annotation_file_name(frame_id: int) -> str:
    return f"{frame_id:08d}.json"


def load_annotation_dir(
    directory,
    scale: float = 1.0,
    image_size: tuple[int, int] = (1280, 720),
) -> dict[int, list[Detection]]:
    """Load every ``*.json`` frame file in a directory, keyed by frame id."""
    directory = Path(directory)
    if not directory.is_dir():
        raise AnnotationError(f"annotation directory not found: {directory}")
    frames: dict[int, list[Detection]] = {}
    for path in sorted(directory.glob("*.json")):
        m = re.search(r"(\d+)", path.stem)
        if m is None:
            logger.warning("skipping annotation file without frame id: %s", path)
            continue
        frame_id = int(m.group(1))
        frames[frame_id] = load_annotations(
            path, frame_id, scale=scale, image_size=image_size
        )
    return frames


def build_frame_pairs(
    annotations: Mapping[int, Sequence[Detection]],
    camera_a: int,
    camera_b: int,
    frame_range: Iterable[int] | None = None,
) -> list[FramePair]:
    """One FramePair per annotated frame; empty sides are retained."""
    if camera_a == camera_b:
        raise ValueError("cameras must be distinct")
    if frame_range is None:
        frame_ids = sorted(annotations)
    else:
        frame_ids = [f for f in frame_range if f in annotations]
    pairs = []
    for frame_id in frame_ids:
        dets = annotations[frame_id]
        pairs.append(
            FramePair(
                frame_id=frame_id,
                camera_a=camera_a,
                camera_b=camera_b,
                detections_a=tuple(
                    d for d in dets if d.camera_id == camera_a
                ),
                detections_b=tuple(
                    d for d in dets if d.camera_id == camera_b
                ),
            )
        )
    return pairs
