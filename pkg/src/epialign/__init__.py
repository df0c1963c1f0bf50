"""Epipolar global alignment and evaluation toolkit for multi-view camera rigs.

Refines noisy multi-view camera parameters by minimizing an adaptively
weighted epipolar distance over selected image pairs, extracts
high-confidence point clouds for downstream radiance-field training, and
evaluates poses and geometry with order-invariant metrics.
"""

from .aligner import (
    AlignerConfig,
    AlignmentReport,
    LossGradient,
    align,
    epipolar_residuals,
    identity_params,
    loss_at,
    loss_gradient,
    select_learning_rate,
    weighted_epipolar_loss,
)
from .geometry import (
    CameraFrame,
    CameraIntrinsics,
    CameraPose,
    CameraRig,
    PoseResidual,
    RelativePose,
    apply_residual,
    epipolar_distance,
    fundamental_matrix,
    project,
    relative_pose,
    rot6d_decode,
    rot6d_encode,
    rotation_angle_deg,
    unproject,
)
from .metrics import (
    ChamferMetrics,
    PoseMetrics,
    Similarity,
    TrajectoryMetrics,
    ate_rmse,
    auc_at_30,
    chamfer,
    evaluate_poses,
    fit_similarity,
    pairwise_errors,
)
from .pairing import (
    MatchSet,
    PairMatches,
    PairSelection,
    cap_correspondences,
    select_pairs,
)
from .pointcloud import (
    DepthMap,
    ScenePointCloud,
    random_cloud,
    sample_depth,
    select_matched_points,
)
from .weighting import (
    ResidualHistogram,
    WeightTable,
    adaptive_weights,
    build_histogram,
    confidence_weights,
    density_at,
    uniform_weights,
)

__version__ = "0.1.0"
