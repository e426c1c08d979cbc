"""
The full 48-configuration hyperparameter sweep on a cluttered synthetic
scene: confidence threshold x distance coefficient x association metric.

Clutter confidences stay below 0.5 while true matches sit in [0.7, 1.0],
so the sweep shows exactly which knobs recover a clean score.
"""

from mvassoc import compute_pair_homography, run_sweep
from mvassoc.pipeline import FrameBundle
from mvassoc.synth import SceneSpec, generate_scene

spec = SceneSpec(
    n_people=5,
    n_frames=12,
    clutter_rate=30.0,
    seed=4,
    area=((-4.5, 4.5), (-4.5, 4.5)),
    focal_px=1250.0,
)
scene = generate_scene(spec)
h = compute_pair_homography(scene.calibrations[1], scene.calibrations[2])

bundles = [
    FrameBundle(f.frame_id, f.detections[1], f.detections[2], f.match_sets[(1, 2)])
    for f in scene.frames
]
rows = run_sweep((1, 2), bundles, h)

print(f"{len(rows)} configurations, ranked by micro f1:\n")
print("rank  threshold  coefficient  metric  precision  recall      f1")
for rank, row in enumerate(rows, start=1):
    if rank <= 10 or rank > len(rows) - 3:
        print(
            f"{rank:4d} {row.config.loftr_threshold:10.1f}"
            f" {row.config.distance_coefficient:12.0f}"
            f" {row.config.metric:>7}"
            f" {row.precision:10.3f} {row.recall:7.3f} {row.f1:7.3f}"
        )
    elif rank == 11:
        print("  ...")

top = rows[0].config
print(
    f"\nbest: threshold {top.loftr_threshold:g}, coefficient "
    f"{top.distance_coefficient:g}, {top.metric} "
    f"-> f1 {rows[0].f1:.3f}"
)
print(
    "note how raising the threshold past the clutter band or enabling the\n"
    "distance coefficient both suppress the planted false matches"
)
