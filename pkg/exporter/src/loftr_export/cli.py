"""Standalone exporter script: `loftr-export --manifest job.json`."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path
from typing import Sequence

from .export import export_matches
from .manifest import JobError, load_manifest

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loftr-export",
        description="Export dense correspondences to match interchange files",
    )
    parser.add_argument("--manifest", required=True, help="JSON job manifest")
    parser.add_argument(
        "--backend", choices=("loftr", "correlation"), help="override backend"
    )
    parser.add_argument("--weights", help="override weights tag or file")
    parser.add_argument("--device", help="override device (cpu/cuda)")
    parser.add_argument("--out", help="override output directory")
    parser.add_argument("--scale", type=float, help="override working scale")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        job = load_manifest(args.manifest)
        overrides = {
            key: value
            for key, value in (
                ("backend", args.backend),
                ("weights", args.weights),
                ("device", args.device),
                ("output_dir", Path(args.out) if args.out else None),
                ("scale", args.scale),
            )
            if value is not None
        }
        if overrides:
            job = dataclasses.replace(job, **overrides)
        written = export_matches(job)
    except JobError as exc:
        logger.error("%s", exc)
        return 1
    print(f"wrote {len(written)} interchange files under {job.output_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
