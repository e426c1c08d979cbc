"""Job manifest: which image pairs to match and where the output goes."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


class JobError(RuntimeError):
    """A job cannot run; the message names the offending path or field."""


@dataclass(frozen=True)
class PairJob:
    frame_id: int
    camera_a: int
    camera_b: int
    image_a: Path
    image_b: Path


@dataclass(frozen=True)
class ExportJob:
    """One export run over a list of frame image pairs.

    ``scale`` is the working-resolution factor applied to the frames
    before matching (2/3 downsamples 1920x1080 capture to 1280x720);
    emitted coordinates are at the scaled resolution.
    """

    pairs: tuple[PairJob, ...]
    output_dir: Path
    scale: float = 2.0 / 3.0
    device: str = "cpu"
    backend: str = "loftr"
    weights: str = "outdoor"
    search_radius: int = 64

    def __post_init__(self) -> None:
        if not self.pairs:
            raise JobError("manifest lists no image pairs")
        if self.scale <= 0:
            raise JobError(f"scale must be positive, got {self.scale}")


def load_manifest(path) -> ExportJob:
    """Parse a JSON job manifest.

    Raises:
        JobError: missing file or malformed field, naming the problem.
    """
    path = Path(path)
    if not path.is_file():
        raise JobError(f"manifest not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise JobError(f"{path}: not valid JSON: {exc}") from exc
    try:
        pairs = tuple(
            PairJob(
                frame_id=int(p["frame_id"]),
                camera_a=int(p["camera_a"]),
                camera_b=int(p["camera_b"]),
                image_a=Path(p["image_a"]),
                image_b=Path(p["image_b"]),
            )
            for p in raw["pairs"]
        )
        return ExportJob(
            pairs=pairs,
            output_dir=Path(raw["output_dir"]),
            scale=float(raw.get("scale", 2.0 / 3.0)),
            device=str(raw.get("device", "cpu")),
            backend=str(raw.get("backend", "loftr")),
            weights=str(raw.get("weights", "outdoor")),
            search_radius=int(raw.get("search_radius", 64)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise JobError(f"{path}: malformed manifest: {exc}") from exc
