"""Geometric core for cross-view-consistent surround-view depth estimation."""

from .attention import (
    AttentionParams,
    FeatureMap,
    SparseAttention,
    aggregate,
    build_sparse_attention,
    feature_similarity,
    identity_attention,
    mahalanobis_sq,
    spatial_weight,
)
from .cylinder import (
    CylCoord,
    Cylinder,
    PositionMap,
    build_position_maps,
    geodesic_delta,
    project_point,
    wrap_angle,
)
from .metrics import (
    CorrespondenceSet,
    DepthMetrics,
    MetricReport,
    adjacent_pairs,
    depth_consistency,
    eigen_metrics,
    evaluate,
    find_correspondences,
    overlap_mask,
)
from .photometry import (
    LossWeights,
    photometric_loss,
    probe_depth_scale,
    smoothness_loss,
    spatial_photometric_loss,
    ssim,
    total_loss,
)
from .rig import (
    Camera,
    CameraRig,
    DepthMap,
    Intrinsics,
    PointMap,
    Pose,
    backproject,
    bilinear_sample,
    compose_spatiotemporal_pose,
    compose_temporal_pose,
    pixel_grid,
    project_to_view,
    unproject,
    warp_spatial,
)
from .synthworld import (
    Box,
    GroundPlane,
    RenderBundle,
    Sphere,
    SynthScene,
    Texture,
    exact_correspondences,
    make_ring_rig,
    preset_scene,
    render,
)

__version__ = "0.1.0"
