"""
The on-disk interchange formats: write a synthetic scene out as
calibration XML, per-frame annotation JSON, and match interchange files,
then read everything back through the dataset loaders.

Real seven-camera data and synthetic data flow through the same loaders,
so this is also the template for pointing the pipeline at a real capture.
"""

import tempfile
from pathlib import Path

from mvassoc import (
    build_frame_pairs,
    load_annotation_dir,
    load_calibrations,
    load_matches,
    match_file_name,
)
from mvassoc.synth import SceneSpec, generate_scene, write_scene

scene = generate_scene(SceneSpec(n_people=3, n_frames=2, seed=21))
root = Path(tempfile.mkdtemp(prefix="mvassoc_demo_"))
dirs = write_scene(scene, root)
for name, path in dirs.items():
    files = sorted(p.name for p in path.iterdir())
    print(f"{name}/: {files}")

print("\n--- calibration XML (first lines) ---")
intr = dirs["calibrations"] / "intr_cam1.xml"
print("\n".join(intr.read_text().splitlines()[:6]))
calib = load_calibrations(intr, dirs["calibrations"] / "extr_cam1.xml", 1)
print(f"reloaded camera 1: image {calib.image_size}, fx = {calib.K[0, 0]:.1f}")

print("\n--- annotation JSON ---")
ann_file = dirs["annotations"] / "00000000.json"
print("\n".join(ann_file.read_text().splitlines()[:8]) + "\n ...")
annotations = load_annotation_dir(dirs["annotations"], image_size=scene.spec.image_size)
pairs = build_frame_pairs(annotations, 1, 2)
print(f"{len(pairs)} frame pairs for cameras (1, 2)")

print("\n--- match interchange file (first lines) ---")
match_file = dirs["matches"] / match_file_name(0, 1, 2)
print("\n".join(match_file.read_text().splitlines()[:4]) + "\n ...")
ms = load_matches(match_file)
print(
    f"reloaded {len(ms)} matches for frame {ms.frame_id}, "
    f"cameras ({ms.camera_a}, {ms.camera_b}), sizes {ms.size_a}/{ms.size_b}"
)
