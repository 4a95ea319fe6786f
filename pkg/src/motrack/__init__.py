"""Detector-agnostic 2D/3D multi-object tracking engine.

Tracking-by-detection with a two-stage (high-score then low-score) data
association, Kalman and detected-velocity motion prediction, gated optimal
assignment, CLEAR-MOT/IDF1/AMOTA evaluation, and a seeded synthetic scenario
harness.
"""

from .assignment import Assignment, solve_assignment
from .association import (
    Detection,
    FrameResult,
    Mode,
    MotionStrategy,
    TrackerConfig,
    Tracklet,
    TrackPool,
    TrackStatus,
    predict_tracks,
    split_detections,
    step,
)
from .geometry import (
    Box2D,
    Box3D,
    Metric,
    SimilarityMatrix,
    bev_intersection_area,
    giou_3d,
    iou_2d,
    similarity_matrix,
)
from .metrics import AmotaReport, ClearReport, amota, clear_mot, idf1, smota_r
from .motion import (
    KalmanState,
    MissingVelocityError,
    NoiseConfig,
    backward_predict,
    kf_init,
    kf_predict,
    kf_update,
    state_to_box,
)
from .simulate import (
    ScenarioSpec,
    baseline_single_association,
    generate_scenario,
)
from .tracker import (
    Tracker,
    TrackOutput,
    TrackRecord,
    default_config,
    run_sequence,
    validate_config,
)

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "AmotaReport",
    "Box2D",
    "Box3D",
    "ClearReport",
    "Detection",
    "FrameResult",
    "KalmanState",
    "Metric",
    "MissingVelocityError",
    "Mode",
    "MotionStrategy",
    "NoiseConfig",
    "ScenarioSpec",
    "SimilarityMatrix",
    "TrackOutput",
    "TrackPool",
    "TrackRecord",
    "TrackStatus",
    "Tracker",
    "TrackerConfig",
    "Tracklet",
    "amota",
    "backward_predict",
    "baseline_single_association",
    "bev_intersection_area",
    "clear_mot",
    "default_config",
    "generate_scenario",
    "giou_3d",
    "idf1",
    "iou_2d",
    "kf_init",
    "kf_predict",
    "kf_update",
    "predict_tracks",
    "run_sequence",
    "similarity_matrix",
    "smota_r",
    "solve_assignment",
    "split_detections",
    "state_to_box",
    "step",
    "validate_config",
]
