"""Multi-camera person association from dense keypoint correspondences."""

__version__ = "0.1.0"

from .affinity import (
    AffinityMatrix,
    PairHistory,
    affinity_m4,
    affinity_m5,
    build_affinity,
)
from .assignment import Association, associate, hungarian
from .correspondence import (
    KeypointMatch,
    MatchSet,
    assign_to_detections,
    filter_by_confidence,
    load_matches,
    match_file_name,
    overlap_mask_filter,
    overlap_polygons,
    save_matches,
)
from .dataset import (
    Detection,
    FramePair,
    build_frame_pairs,
    load_annotation_dir,
    load_annotations,
    load_calibrations,
)
from .evaluation import (
    EvalCounts,
    SweepConfig,
    WILDTRACK_CAMERA_PAIRS,
    f1_from_precision_recall,
    micro_f1,
    run_sweep,
    score_frame,
    sweep_grid,
)
from .geometry import (
    CameraCalibration,
    GroundGrid,
    Homography,
    compute_pair_homography,
    estimate_homography_ransac,
    generate_ground_grid,
    project_point_h,
    project_points,
    rodrigues,
    rotation_to_rvec,
    scale_calibration,
)
from .pipeline import FrameBundle, PipelineConfig, run_frame, run_sequence
from .refactor import RefactorParams, gaussian_confidence, refactor_matches
from .synth import SceneSpec, SyntheticScene, generate_scene, write_scene

__all__ = [
    "AffinityMatrix",
    "Association",
    "CameraCalibration",
    "Detection",
    "EvalCounts",
    "FrameBundle",
    "FramePair",
    "GroundGrid",
    "Homography",
    "KeypointMatch",
    "MatchSet",
    "PairHistory",
    "PipelineConfig",
    "RefactorParams",
    "SceneSpec",
    "SweepConfig",
    "SyntheticScene",
    "WILDTRACK_CAMERA_PAIRS",
    "affinity_m4",
    "affinity_m5",
    "assign_to_detections",
    "associate",
    "build_affinity",
    "build_frame_pairs",
    "compute_pair_homography",
    "estimate_homography_ransac",
    "f1_from_precision_recall",
    "filter_by_confidence",
    "generate_ground_grid",
    "generate_scene",
    "hungarian",
    "load_annotation_dir",
    "load_annotations",
    "load_calibrations",
    "load_matches",
    "match_file_name",
    "micro_f1",
    "overlap_mask_filter",
    "overlap_polygons",
    "project_point_h",
    "project_points",
    "refactor_matches",
    "gaussian_confidence",
    "rodrigues",
    "rotation_to_rvec",
    "run_frame",
    "run_sequence",
    "run_sweep",
    "save_matches",
    "scale_calibration",
    "score_frame",
    "sweep_grid",
    "write_scene",
]
