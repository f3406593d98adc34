"""Pinhole camera rigs: intrinsics, rigid poses, back-projection, inverse warping.

Conventions used throughout the library:

* Pixel centers sit at integer coordinates ``(u, v)``; the principal point
  ``(cx, cy)`` lives in the same coordinate system (no half-pixel offset),
  so back-projection of a pixel is ``depth * K^-1 @ (u, v, 1)``.
* A camera pose maps CAMERA coordinates into the shared REFERENCE frame:
  ``p_ref = R @ p_cam + t``.
* Depth is measured along the camera z-axis (optical axis), in meters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError

# Camera-frame points with z below this are treated as behind the camera.
Z_MIN = 1e-3

# Orthonormality / inversion tolerance for rigid transforms.
POSE_TOL = 1e-9

# Border slack in pixels: coordinates within this of the raster edge count
# as inside (absorbs float round-trip noise, far below any geometric signal).
BOUND_EPS = 1e-9


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics in pixels for a ``width x height`` raster."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ParameterError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (0 < self.cx < self.width):
            raise ParameterError(f"cx={self.cx} outside (0, {self.width})")
        if not (0 < self.cy < self.height):
            raise ParameterError(f"cy={self.cy} outside (0, {self.height})")

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    def inverse_matrix(self) -> np.ndarray:
        # Closed form; fx, fy > 0 is enforced above so K is always invertible.
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ]
        )


@dataclass(frozen=True)
class Pose:
    """Rigid transform as a 4x4 homogeneous matrix (rotation + metric translation)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (4, 4):
            raise ParameterError(f"pose matrix must be 4x4, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ParameterError("pose matrix contains non-finite entries")
        if np.abs(m[3] - np.array([0.0, 0.0, 0.0, 1.0])).max() > POSE_TOL:
            raise ParameterError("pose last row must be (0, 0, 0, 1)")
        r = m[:3, :3]
        if np.abs(r @ r.T - np.eye(3)).max() > POSE_TOL:
            raise ParameterError("pose rotation block is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > POSE_TOL:
            raise ParameterError("pose rotation block must have determinant +1")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(4))

    @classmethod
    def from_rt(cls, rotation, translation) -> "Pose":
        m = np.eye(4)
        m[:3, :3] = np.asarray(rotation, dtype=np.float64)
        m[:3, 3] = np.asarray(translation, dtype=np.float64)
        return cls(m)

    @property
    def rotation(self) -> np.ndarray:
        return self.matrix[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.matrix[:3, 3]

    def compose(self, other: "Pose") -> "Pose":
        """Return ``self @ other`` (apply ``other`` first, then ``self``)."""
        return Pose(self.matrix @ other.matrix)

    def inverse(self) -> "Pose":
        r = self.rotation
        m = np.eye(4)
        m[:3, :3] = r.T
        m[:3, 3] = -r.T @ self.translation
        return Pose(m)

    def transform(self, points: np.ndarray) -> np.ndarray:
        """Apply the transform to an ``(..., 3)`` array of points."""
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation


@dataclass(frozen=True)
class Camera:
    name: str
    intrinsics: Intrinsics
    pose: Pose  # camera -> reference


@dataclass(frozen=True)
class CameraRig:
    """Ordered set of cameras sharing one reference frame.

    ``front_index`` designates the front camera used for temporal pose
    composition.  ``warnings`` records non-fatal configuration findings
    (e.g. a ring layout without adjacent overlap).
    """

    cameras: tuple[Camera, ...]
    front_index: int = 0
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.cameras) < 1:
            raise ParameterError("a rig needs at least one camera")
        if not (0 <= self.front_index < len(self.cameras)):
            raise ParameterError(f"front_index {self.front_index} out of range")
        object.__setattr__(self, "cameras", tuple(self.cameras))

    def __len__(self) -> int:
        return len(self.cameras)

    def relative_pose(self, i: int, j: int) -> Pose:
        """Pose mapping camera-``i`` coordinates into camera-``j`` coordinates."""
        return self.cameras[j].pose.inverse().compose(self.cameras[i].pose)

    def cam_to_front(self, i: int) -> Pose:
        return self.relative_pose(i, self.front_index)


@dataclass(frozen=True)
class DepthMap:
    """Per-pixel depth in meters along the camera z-axis, plus validity."""

    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        m = np.asarray(self.valid, dtype=bool)
        if v.ndim != 2 or m.shape != v.shape:
            raise DimensionError(f"depth {v.shape} and mask {m.shape} must be equal 2D shapes")
        used = v[m]
        if used.size and not (np.all(np.isfinite(used)) and np.all(used > 0)):
            raise ParameterError("valid depth entries must be strictly positive and finite")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "valid", m)

    @classmethod
    def from_values(cls, values) -> "DepthMap":
        v = np.asarray(values, dtype=np.float64)
        return cls(v, np.isfinite(v) & (v > 0))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def scaled(self, s: float) -> "DepthMap":
        return DepthMap(self.values * s, self.valid)


@dataclass(frozen=True)
class PointMap:
    """Raster of 3D points in reference-frame meters, plus validity."""

    points: np.ndarray  # (H, W, 3)
    valid: np.ndarray  # (H, W)

    def __post_init__(self):
        p = np.asarray(self.points, dtype=np.float64)
        m = np.asarray(self.valid, dtype=bool)
        if p.ndim != 3 or p.shape[2] != 3 or m.shape != p.shape[:2]:
            raise DimensionError(f"points {p.shape} and mask {m.shape} are inconsistent")
        if m.any() and not np.all(np.isfinite(p[m])):
            raise ParameterError("valid points must be finite")
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "valid", m)


def pixel_grid(intr: Intrinsics, stride: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Pixel coordinates sampled by a strided raster.

    For stride ``s`` each output cell covers an ``s x s`` window of input
    pixels and is located at the window's center ``k*s + (s-1)/2``.
    """
    u = np.arange(intr.width // stride) * stride + (stride - 1) / 2.0
    v = np.arange(intr.height // stride) * stride + (stride - 1) / 2.0
    return np.meshgrid(u, v)


def backproject(depth: DepthMap, intr: Intrinsics, pose: Pose, stride: int = 1) -> PointMap:
    """Lift a depth map to 3D reference-frame points: ``pose o (d * K^-1 p)``.

    With ``stride > 1`` the depth map is average-pooled over stride windows;
    a pooled cell is valid only when every covered pixel is valid.
    """
    h, w = depth.shape
    if (h, w) != (intr.height, intr.width):
        raise DimensionError(f"depth {depth.shape} does not match intrinsics raster {(intr.height, intr.width)}")
    if stride < 1 or h % stride or w % stride:
        raise DimensionError(f"stride {stride} does not divide raster {h}x{w}")

    if stride == 1:
        d = depth.values
        valid = depth.valid
    else:
        win = depth.values.reshape(h // stride, stride, w // stride, stride)
        d = win.mean(axis=(1, 3))
        valid = depth.valid.reshape(h // stride, stride, w // stride, stride).all(axis=(1, 3))

    uu, vv = pixel_grid(intr, stride)
    x = d * (uu - intr.cx) / intr.fx
    y = d * (vv - intr.cy) / intr.fy
    pts_cam = np.stack([x, y, d], axis=-1)
    return PointMap(pose.transform(pts_cam), valid)


def project_to_view(points: PointMap, intr: Intrinsics, pose: Pose) -> tuple[np.ndarray, np.ndarray]:
    """Project reference-frame points into a camera.

    ``pose`` maps that camera's frame to the reference frame; its inverse is
    applied internally.  Returns an ``(..., 3)`` raster of ``(u, v, depth)``
    and a validity mask; invalid where the point sits behind the camera
    (``z <= Z_MIN``) or lands outside ``[0, W-1] x [0, H-1]``.
    """
    cam = pose.inverse().transform(points.points)
    z = cam[..., 2]
    safe_z = np.where(z > Z_MIN, z, 1.0)
    u = intr.fx * cam[..., 0] / safe_z + intr.cx
    v = intr.fy * cam[..., 1] / safe_z + intr.cy
    valid = (
        points.valid
        & (z > Z_MIN)
        & (u >= -BOUND_EPS)
        & (u <= intr.width - 1 + BOUND_EPS)
        & (v >= -BOUND_EPS)
        & (v <= intr.height - 1 + BOUND_EPS)
    )
    return np.stack([u, v, z], axis=-1), valid


def unproject(uv: np.ndarray, depth: np.ndarray, intr: Intrinsics, pose: Pose) -> np.ndarray:
    """Back-project continuous pixel coordinates ``(N, 2)`` with given depths."""
    uv = np.asarray(uv, dtype=np.float64)
    d = np.asarray(depth, dtype=np.float64)
    x = d * (uv[..., 0] - intr.cx) / intr.fx
    y = d * (uv[..., 1] - intr.cy) / intr.fy
    return pose.transform(np.stack([x, y, d], axis=-1))


def bilinear_sample(image: np.ndarray, uv: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sample ``image`` (H, W) or (H, W, C) at continuous ``uv`` (..., 2).

    A sample is valid only when every tap with nonzero weight is in bounds;
    out-of-bounds taps are never clamped into the image.  Taps that receive
    exactly zero weight (integer coordinates) are not required, so sampling
    on the last row/column is valid.
    """
    img = np.asarray(image, dtype=np.float64)
    planar = img.ndim == 2
    if planar:
        img = img[..., None]
    h, w = img.shape[:2]
    u = np.asarray(uv, dtype=np.float64)[..., 0]
    v = np.asarray(uv, dtype=np.float64)[..., 1]

    valid = (u >= -BOUND_EPS) & (u <= w - 1 + BOUND_EPS) & (v >= -BOUND_EPS) & (v <= h - 1 + BOUND_EPS)
    u = np.clip(u, 0.0, w - 1.0)
    v = np.clip(v, 0.0, h - 1.0)

    x0 = np.floor(u).astype(np.int64)
    y0 = np.floor(v).astype(np.int64)
    wx = u - x0
    wy = v - y0
    x0c = np.clip(x0, 0, w - 1)
    y0c = np.clip(y0, 0, h - 1)
    x1c = np.clip(x0 + 1, 0, w - 1)
    y1c = np.clip(y0 + 1, 0, h - 1)

    w00 = (1.0 - wx) * (1.0 - wy)
    w10 = wx * (1.0 - wy)
    w01 = (1.0 - wx) * wy
    w11 = wx * wy
    out = (
        img[y0c, x0c] * w00[..., None]
        + img[y0c, x1c] * w10[..., None]
        + img[y1c, x0c] * w01[..., None]
        + img[y1c, x1c] * w11[..., None]
    )
    if planar:
        out = out[..., 0]
    return out, valid


def warp_spatial(
    target_depth: DepthMap,
    source_image: np.ndarray,
    intr_i: Intrinsics,
    intr_j: Intrinsics,
    relpose_ji: Pose,
) -> tuple[np.ndarray, np.ndarray]:
    """Inverse-warp ``source_image`` (camera j) into the target view (camera i).

    Each target pixel is back-projected with ``target_depth``, moved into the
    source camera by ``relpose_ji`` (mapping camera-i coordinates to camera-j
    coordinates) and bilinearly sampled from the source.  Returns the warped
    raster plus a validity mask.
    """
    h, w = target_depth.shape
    if (h, w) != (intr_i.height, intr_i.width):
        raise DimensionError(f"target depth {target_depth.shape} does not match target intrinsics")
    src = np.asarray(source_image, dtype=np.float64)
    if src.shape[:2] != (intr_j.height, intr_j.width):
        raise DimensionError(f"source image {src.shape[:2]} does not match source intrinsics")

    pts_i = backproject(target_depth, intr_i, Pose.identity())
    pts_j = PointMap(relpose_ji.transform(pts_i.points), pts_i.valid)
    uvz, proj_valid = project_to_view(pts_j, intr_j, Pose.identity())
    warped, sample_valid = bilinear_sample(src, uvz[..., :2])
    mask = target_depth.valid & proj_valid & sample_valid
    if warped.ndim == 3:
        warped = np.where(mask[..., None], warped, 0.0)
    else:
        warped = np.where(mask, warped, 0.0)
    return warped, mask


def compose_temporal_pose(front_motion: Pose, cam_to_front: Pose) -> Pose:
    """Motion of camera i derived from the front camera's motion.

    With ``T = cam_to_front`` (camera i -> front camera) and the front
    camera's temporal motion ``T_front``, camera i moves by
    ``T^-1 @ T_front @ T``.
    """
    return cam_to_front.inverse().compose(front_motion).compose(cam_to_front)


def compose_spatiotemporal_pose(temporal_j: Pose, spatial_ji: Pose) -> Pose:
    """Chain a temporal motion of camera j after the spatial i->j transform."""
    return temporal_j.compose(spatial_ji)
