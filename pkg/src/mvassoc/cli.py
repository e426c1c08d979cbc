"""Command-line pipeline driver.

Subcommands: ``homography``, ``associate``, ``sweep``, ``synth``,
``score``.  Options come from a declarative JSON config file plus flag
overrides (flags win); every run writes a ``manifest.json`` with the
resolved parameters, the seed, and SHA-256 digests of the inputs it read,
so outputs are exactly reproducible.  All outputs are plain text or JSON.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .affinity import save_affinity
from .assignment import save_associations
from .correspondence import (
    filter_by_confidence,
    load_matches,
    match_file_name,
    overlap_mask_filter,
    overlap_polygons,
)
from .dataset import build_frame_pairs, load_annotation_dir, load_calibrations
from .errors import NoOverlapError
from .evaluation import (
    EvalCounts,
    SweepRow,
    micro_f1,
    run_sweep,
    score_frame,
    sweep_grid,
)
from .geometry import GroundGrid, compute_pair_homography, scale_calibration
from .pipeline import FrameBundle, PipelineConfig, run_sequence
from .refactor import RefactorParams, refactor_records, write_refactor_diagnostics
from .synth import SceneSpec, generate_scene, write_scene

logger = logging.getLogger(__name__)

_DEFAULTS = {
    "scale": 1.0,
    "native_size": "1920x1080",
    "ransac_threshold": 10.0,
    "ransac_iters": 2000,
    "seed": 0,
    "loftr_threshold": 0.0,
    "distance_coeff": 0.0,
    "metric": "M4",
    "window": 3,
    "accept_threshold": 0.0,
    "grid_rows": 1440,
    "grid_cols": 480,
    "grid_spacing": 0.025,
    "grid_z_units": 40,
}


def _parse_pair(text: str) -> tuple[int, int]:
    try:
        a, b = (int(v) for v in text.replace(" ", "").split(","))
    except ValueError as exc:
        raise SystemExit(f"bad --pair {text!r}: expected 'A,B'") from exc
    if a == b:
        raise SystemExit(f"bad --pair {text!r}: cameras must differ")
    return (a, b)


def _parse_size(text: str) -> tuple[int, int]:
    w, h = (int(v) for v in text.lower().split("x"))
    return (w, h)


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _resolve(args: argparse.Namespace) -> dict:
    """defaults < config file < explicit flags."""
    merged = dict(_DEFAULTS)
    config_path = getattr(args, "config", None)
    if config_path:
        merged.update(json.loads(Path(config_path).read_text(encoding="utf-8")))
    for key, value in vars(args).items():
        if key in ("config", "func") or value is None:
            continue
        merged[key] = value
    return merged


def _write_manifest(
    outdir: Path, command: str, params: dict, inputs: Sequence[Path]
) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "parameters": {
            k: v for k, v in sorted(params.items()) if not callable(v)
        },
        "inputs": {
            str(p): _sha256(p) for p in sorted(set(inputs), key=str)
        },
    }
    (outdir / "manifest.json").write_text(
        json.dumps(manifest, indent=1, sort_keys=True, default=str) + "\n",
        encoding="utf-8",
    )


def _calibration_paths(params: dict, camera_id: int) -> tuple[Path, Path]:
    mapping = params.get("calibration_files", {})
    if str(camera_id) in mapping:
        entry = mapping[str(camera_id)]
        return (Path(entry["intrinsic"]), Path(entry["extrinsic"]))
    calib_dir = Path(params["calib_dir"])
    return (
        calib_dir / f"intr_cam{camera_id}.xml",
        calib_dir / f"extr_cam{camera_id}.xml",
    )


def _load_camera(params: dict, camera_id: int):
    intr, extr = _calibration_paths(params, camera_id)
    calib = load_calibrations(
        intr, extr, camera_id, image_size=_parse_size(params["native_size"])
    )
    scale = float(params["scale"])
    if scale != 1.0:
        calib = scale_calibration(calib, scale)
    return calib, [intr, extr]


def _grid(params: dict) -> GroundGrid:
    return GroundGrid(
        rows=int(params["grid_rows"]),
        cols=int(params["grid_cols"]),
        spacing=float(params["grid_spacing"]),
        z_units=int(params["grid_z_units"]),
    )


def _pair_homography(params: dict, pair: tuple[int, int]):
    calib_a, paths_a = _load_camera(params, pair[0])
    calib_b, paths_b = _load_camera(params, pair[1])
    if calib_a.image_size != calib_b.image_size:
        raise SystemExit(
            f"cameras {pair} have different working sizes "
            f"{calib_a.image_size} vs {calib_b.image_size}"
        )
    h = compute_pair_homography(
        calib_a,
        calib_b,
        grid=_grid(params),
        threshold_px=float(params["ransac_threshold"]),
        max_iters=int(params["ransac_iters"]),
        seed=int(params["seed"]),
    )
    return h, calib_a, calib_b, paths_a + paths_b


def _bundles(params: dict, pair: tuple[int, int], working_size):
    scale = float(params["scale"])
    annotations = load_annotation_dir(
        params["annotations_dir"], scale=scale, image_size=working_size
    )
    frame_pairs = build_frame_pairs(annotations, pair[0], pair[1])
    match_dir = Path(params["matches_dir"])
    bundles, inputs = [], []
    for fp in frame_pairs:
        path = match_dir / match_file_name(fp.frame_id, pair[0], pair[1])
        if path.is_file():
            bundles.append(FrameBundle.from_frame_pair(fp, load_matches(path)))
            inputs.append(path)
        else:
            logger.warning("no match file for frame %d: %s", fp.frame_id, path)
            bundles.append(FrameBundle.from_frame_pair(fp, None))
    ann_dir = Path(params["annotations_dir"])
    inputs.extend(sorted(ann_dir.glob("*.json")))
    return bundles, inputs


def _fmt(v: float | None) -> str:
    return "" if v is None else f"{v:.6f}"


def cmd_homography(args: argparse.Namespace) -> int:
    params = _resolve(args)
    outdir = Path(params["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    pairs = [_parse_pair(p) for p in params["pair"]]
    report: dict[str, dict] = {}
    inputs: list[Path] = []
    failures = 0
    for pair in pairs:
        tag = f"c{pair[0]}_c{pair[1]}"
        try:
            h, calib_a, calib_b, paths = _pair_homography(params, pair)
        except NoOverlapError as exc:
            logger.warning("pair %s: %s", pair, exc)
            report[tag] = {"error": str(exc)}
            failures += 1
            continue
        inputs.extend(paths)
        lines = [
            " ".join(repr(float(v)) for v in row) for row in h.H
        ] + [f"inliers {h.inlier_count}"]
        (outdir / f"homography_{tag}.txt").write_text(
            "\n".join(lines) + "\n", encoding="utf-8"
        )
        report[tag] = {"H": h.H.tolist(), "inlier_count": h.inlier_count}
        # Warped image-rectangle polygons for qualitative alignment plots
        # (clipped to the finite side, so wide-baseline pairs stay plottable).
        wa, ha = calib_a.image_size
        wb, hb = calib_b.image_size
        rect_a = np.array([[0, 0], [wa, 0], [wa, ha], [0, ha]], dtype=float)
        rect_b = np.array([[0, 0], [wb, 0], [wb, hb], [0, hb]], dtype=float)
        warp_lines = []
        polys = [
            ("a_in_b", overlap_polygons(h.inverse(), calib_b.image_size, calib_a.image_size)),
            ("rect_b", [rect_b]),
            ("b_in_a", overlap_polygons(h, calib_a.image_size, calib_b.image_size)),
            ("rect_a", [rect_a]),
        ]
        for label, pieces in polys:
            for part, quad in enumerate(pieces):
                for x, y in quad:
                    warp_lines.append(f"{label}.{part} {x!r} {y!r}")
        (outdir / f"warp_{tag}.txt").write_text(
            "\n".join(warp_lines) + "\n", encoding="utf-8"
        )
    (outdir / "homographies.json").write_text(
        json.dumps(report, indent=1, sort_keys=True) + "\n", encoding="utf-8"
    )
    _write_manifest(outdir, "homography", params, inputs)
    return 1 if failures == len(pairs) else 0


def cmd_associate(args: argparse.Namespace) -> int:
    params = _resolve(args)
    outdir = Path(params["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    pair = _parse_pair(params["pair"])
    h, calib_a, _, inputs = _pair_homography(params, pair)
    bundles, data_inputs = _bundles(params, pair, calib_a.image_size)
    inputs += data_inputs
    config = PipelineConfig(
        loftr_threshold=float(params["loftr_threshold"]),
        distance_coefficient=float(params["distance_coeff"]),
        metric=str(params["metric"]),
        window=int(params["window"]),
        accept_threshold=float(params["accept_threshold"]),
        apply_mask=not params.get("no_mask", False),
    )
    seq = run_sequence(bundles, h, config, on_frame_error="skip")
    totals = EvalCounts()
    score_lines = ["frame tp fp fn"]
    tag = f"c{pair[0]}_c{pair[1]}"
    for bundle, result in zip(bundles, seq.results):
        if result.error is not None:
            score_lines.append(f"{bundle.frame_id} skipped ({result.error})")
            continue
        save_associations(
            outdir / f"associations_f{bundle.frame_id:08d}_{tag}.txt",
            result.association,
            bundle.detections_a,
            bundle.detections_b,
        )
        if params.get("dump_affinity"):
            save_affinity(
                outdir / f"affinity_f{bundle.frame_id:08d}_{tag}.txt",
                result.affinity,
            )
        if params.get("dump_refactor"):
            ms = overlap_mask_filter(
                bundle.matches, h, bundle.matches.size_a, bundle.matches.size_b
            ) if config.apply_mask else bundle.matches
            ms = filter_by_confidence(ms, config.loftr_threshold)
            write_refactor_diagnostics(
                outdir / f"refactor_f{bundle.frame_id:08d}_{tag}.txt",
                refactor_records(
                    ms, h, RefactorParams(config.distance_coefficient)
                ),
            )
        counts = score_frame(
            result.association, bundle.detections_a, bundle.detections_b
        )
        totals = totals + counts
        score_lines.append(
            f"{bundle.frame_id} {counts.tp} {counts.fp} {counts.fn}"
        )
    p, r, f1 = micro_f1(totals)
    (outdir / "frame_scores.txt").write_text(
        "\n".join(score_lines) + "\n", encoding="utf-8"
    )
    summary = {
        "pair": list(pair),
        "tp": totals.tp,
        "fp": totals.fp,
        "fn": totals.fn,
        "precision": p,
        "recall": r,
        "f1": f1,
        "frames": len(bundles),
        "failed_frames": len(seq.failed_frames),
    }
    (outdir / "summary.json").write_text(
        json.dumps(summary, indent=1, sort_keys=True) + "\n", encoding="utf-8"
    )
    _write_manifest(outdir, "associate", params, inputs)
    print(
        f"pair {pair}: precision {p:.4f} recall {r:.4f} f1 {f1:.4f} "
        f"({totals.tp} tp, {totals.fp} fp, {totals.fn} fn)"
    )
    return 0


def _sweep_rows_tsv(rows: Sequence[SweepRow]) -> list[str]:
    out = []
    for row in rows:
        counts = row.counts or EvalCounts()
        out.append(
            "\t".join(
                [
                    f"{row.pair[0]},{row.pair[1]}",
                    _fmt(row.precision),
                    _fmt(row.recall),
                    _fmt(row.f1),
                    f"{row.config.loftr_threshold:g}",
                    f"{row.config.distance_coefficient:g}",
                    row.config.metric,
                    str(counts.tp),
                    str(counts.fp),
                    str(counts.fn),
                    row.error or "",
                ]
            )
        )
    return out


_SWEEP_HEADER = (
    "pair\tprecision\trecall\tf1\tloftr_threshold\tdistance_coefficient"
    "\tmetric\ttp\tfp\tfn\terror"
)


def cmd_sweep(args: argparse.Namespace) -> int:
    params = _resolve(args)
    outdir = Path(params["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    pairs = [_parse_pair(p) for p in params["pair"]]
    configs = sweep_grid()
    all_rows: list[SweepRow] = []
    best_rows: list[SweepRow] = []
    inputs: list[Path] = []
    for pair in pairs:
        h, calib_a, _, h_inputs = _pair_homography(params, pair)
        bundles, data_inputs = _bundles(params, pair, calib_a.image_size)
        inputs += h_inputs + data_inputs
        rows = run_sweep(
            pair,
            bundles,
            h,
            configs,
            window=int(params["window"]),
            accept_threshold=float(params["accept_threshold"]),
            apply_mask=not params.get("no_mask", False),
            jobs=int(params.get("jobs", 1)),
        )
        tag = f"c{pair[0]}_c{pair[1]}"
        (outdir / f"sweep_{tag}.tsv").write_text(
            "\n".join([_SWEEP_HEADER] + _sweep_rows_tsv(rows)) + "\n",
            encoding="utf-8",
        )
        surface = ["loftr_threshold distance_coefficient metric f1"]
        for row in sorted(
            rows,
            key=lambda r: (
                r.config.loftr_threshold,
                r.config.distance_coefficient,
                r.config.metric,
            ),
        ):
            surface.append(
                f"{row.config.loftr_threshold:g} "
                f"{row.config.distance_coefficient:g} "
                f"{row.config.metric} {_fmt(row.f1) or 'nan'}"
            )
        (outdir / f"f1_surface_{tag}.txt").write_text(
            "\n".join(surface) + "\n", encoding="utf-8"
        )
        all_rows.extend(rows)
        best_rows.append(rows[0])
        top = rows[0]
        print(
            f"pair {pair}: best f1 {_fmt(top.f1) or 'n/a'} at "
            f"threshold {top.config.loftr_threshold:g}, "
            f"coefficient {top.config.distance_coefficient:g}, "
            f"{top.config.metric}"
        )
    (outdir / "sweep_report.tsv").write_text(
        "\n".join([_SWEEP_HEADER] + _sweep_rows_tsv(all_rows)) + "\n",
        encoding="utf-8",
    )
    (outdir / "best_configs.tsv").write_text(
        "\n".join([_SWEEP_HEADER] + _sweep_rows_tsv(best_rows)) + "\n",
        encoding="utf-8",
    )
    report = [
        {
            "pair": list(row.pair),
            "precision": row.precision,
            "recall": row.recall,
            "f1": row.f1,
            "loftr_threshold": row.config.loftr_threshold,
            "distance_coefficient": row.config.distance_coefficient,
            "metric": row.config.metric,
            "error": row.error,
        }
        for row in all_rows
    ]
    (outdir / "report.json").write_text(
        json.dumps(report, indent=1) + "\n", encoding="utf-8"
    )
    _write_manifest(outdir, "sweep", params, inputs)
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    params = _resolve(args)
    outdir = Path(params["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    spec = SceneSpec(
        n_cameras=int(params.get("cameras", 2)),
        n_people=int(params.get("people", 5)),
        n_frames=int(params.get("frames", 20)),
        clutter_rate=float(params.get("clutter_rate", 0.0)),
        coord_noise_px=float(params.get("noise_px", 0.0)),
        seed=int(params["seed"]),
    )
    scene = generate_scene(spec)
    dirs = write_scene(scene, outdir)
    n_matches = sum(
        len(ms) for frame in scene.frames for ms in frame.match_sets.values()
    )
    _write_manifest(outdir, "synth", params, [])
    print(
        f"wrote {spec.n_frames} frames, {spec.n_cameras} cameras, "
        f"{n_matches} matches under {outdir}"
    )
    for name, path in dirs.items():
        print(f"  {name}: {path}")
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    params = _resolve(args)
    outdir = Path(params["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    pair = _parse_pair(params["pair"])
    tag = f"c{pair[0]}_c{pair[1]}"
    scale = float(params["scale"])
    working = _parse_size(params.get("working_size", params["native_size"]))
    if scale != 1.0:
        working = (round(working[0] * scale), round(working[1] * scale))
    annotations = load_annotation_dir(
        params["annotations_dir"], scale=scale, image_size=working
    )
    pred_dir = Path(params["associations_dir"])
    inputs: list[Path] = sorted(pred_dir.glob(f"associations_f*_{tag}.txt"))
    totals = EvalCounts()
    for frame_id, dets in sorted(annotations.items()):
        ids_a = {d.person_id for d in dets if d.camera_id == pair[0]}
        ids_b = {d.person_id for d in dets if d.camera_id == pair[1]}
        covisible = ids_a & ids_b
        path = pred_dir / f"associations_f{frame_id:08d}_{tag}.txt"
        predicted: list[tuple[int, int]] = []
        if path.is_file():
            for line in path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                frame, pid_a, pid_b, _ = line.split()
                predicted.append((int(pid_a), int(pid_b)))
        tp_persons = {a for a, b in predicted if a == b}
        fp = sum(1 for a, b in predicted if a != b)
        totals = totals + EvalCounts(
            tp=len(tp_persons), fp=fp, fn=len(covisible - tp_persons)
        )
    p, r, f1 = micro_f1(totals)
    result = {
        "pair": list(pair),
        "tp": totals.tp,
        "fp": totals.fp,
        "fn": totals.fn,
        "precision": p,
        "recall": r,
        "f1": f1,
    }
    (outdir / "scores.json").write_text(
        json.dumps(result, indent=1, sort_keys=True) + "\n", encoding="utf-8"
    )
    _write_manifest(outdir, "score", params, inputs)
    print(f"pair {pair}: precision {p:.4f} recall {r:.4f} f1 {f1:.4f}")
    return 0


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="JSON config file; flags override it")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--seed", type=int, help="top-level RNG seed")
    sp.add_argument("--scale", type=float, help="working resolution scale")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mvassoc",
        description="Multi-camera person association pipeline",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("homography", help="estimate camera-pair homographies")
    _add_common(sp)
    sp.add_argument("--calib-dir", dest="calib_dir")
    sp.add_argument("--pair", action="append", help="camera pair 'A,B'")
    sp.add_argument("--native-size", dest="native_size")
    sp.add_argument("--ransac-threshold", dest="ransac_threshold", type=float)
    sp.set_defaults(func=cmd_homography)

    sp = sub.add_parser("associate", help="run one configuration on one pair")
    _add_common(sp)
    sp.add_argument("--calib-dir", dest="calib_dir")
    sp.add_argument("--annotations-dir", dest="annotations_dir")
    sp.add_argument("--matches-dir", dest="matches_dir")
    sp.add_argument("--pair")
    sp.add_argument("--native-size", dest="native_size")
    sp.add_argument("--loftr-threshold", dest="loftr_threshold", type=float)
    sp.add_argument("--distance-coeff", dest="distance_coeff", type=float)
    sp.add_argument("--metric", choices=("M4", "M5"))
    sp.add_argument("--window", type=int)
    sp.add_argument("--accept-threshold", dest="accept_threshold", type=float)
    sp.add_argument("--no-mask", dest="no_mask", action="store_true", default=None)
    sp.add_argument(
        "--dump-affinity", dest="dump_affinity", action="store_true", default=None
    )
    sp.add_argument(
        "--dump-refactor", dest="dump_refactor", action="store_true", default=None
    )
    sp.set_defaults(func=cmd_associate)

    sp = sub.add_parser("sweep", help="full hyperparameter grid on camera pairs")
    _add_common(sp)
    sp.add_argument("--calib-dir", dest="calib_dir")
    sp.add_argument("--annotations-dir", dest="annotations_dir")
    sp.add_argument("--matches-dir", dest="matches_dir")
    sp.add_argument("--pair", action="append", help="camera pair 'A,B'")
    sp.add_argument("--native-size", dest="native_size")
    sp.add_argument("--window", type=int)
    sp.add_argument("--accept-threshold", dest="accept_threshold", type=float)
    sp.add_argument("--no-mask", dest="no_mask", action="store_true", default=None)
    sp.add_argument("--jobs", type=int, help="configs evaluated in parallel")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("synth", help="generate a synthetic ground-truth scene")
    _add_common(sp)
    sp.add_argument("--cameras", type=int)
    sp.add_argument("--people", type=int)
    sp.add_argument("--frames", type=int)
    sp.add_argument("--clutter-rate", dest="clutter_rate", type=float)
    sp.add_argument("--noise-px", dest="noise_px", type=float)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("score", help="score association files against truth")
    _add_common(sp)
    sp.add_argument("--associations-dir", dest="associations_dir")
    sp.add_argument("--annotations-dir", dest="annotations_dir")
    sp.add_argument("--pair")
    sp.add_argument("--native-size", dest="native_size")
    sp.add_argument("--working-size", dest="working_size")
    sp.set_defaults(func=cmd_score)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except Exception as exc:  # noqa: BLE001 - single fatal exit point
        logger.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
