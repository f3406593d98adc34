"""Depth evaluation: standard per-pixel metrics plus multi-view consistency.

The consistency metric pairs pixels across spatially adjacent views via
ground-truth geometry, expresses both views' predictions as Euclidean
distances to the reference-frame origin, and reports the RMSE between them.

Depth maps are sampled at continuous coordinates in DISPARITY space
(bilinear on 1/depth): disparity is an affine function of pixel
coordinates on planar geometry, so the interpolation is exact there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, EmptyEvaluationError
from .rig import (
    BOUND_EPS,
    CameraRig,
    DepthMap,
    backproject,
    pixel_grid,
    project_to_view,
    unproject,
)

# A correspondence is kept only when the two ground-truth back-projections
# agree in 3D this closely (meters).  On piecewise-planar scenes the
# disparity-space interpolation is exact up to float noise, so true pairs
# pass with orders of magnitude to spare while interpolation across depth
# edges (or past sub-pixel grazing structure) is rejected.  Loosen for
# curved or sensor-noisy ground truth.
COINCIDENCE_TOL = 1e-7

# Ground-truth validity floor (near-field noise exclusion).
D_MIN_DEFAULT = 0.1


@dataclass(frozen=True)
class DepthMetrics:
    """Standard depth error statistics over one set of pixels."""

    abs_rel: float
    sq_rel: float
    rmse: float
    delta1: float  # percent of pixels with max(p/g, g/p) < 1.25
    n_pixels: int


@dataclass(frozen=True)
class CorrespondenceSet:
    """Cross-view pixel pairs established from ground-truth geometry.

    ``pixel_i`` are integer pixel centers of ``view_i``; ``pixel_j`` are the
    continuous landing coordinates in ``view_j``.  ``ref_distance`` is the
    ground-truth point's Euclidean distance to the reference origin;
    ``depth_i`` / ``depth_j`` are the ground-truth z-depths on either side.
    """

    view_i: np.ndarray
    pixel_i: np.ndarray  # (N, 2) u, v
    view_j: np.ndarray
    pixel_j: np.ndarray  # (N, 2) u, v
    ref_distance: np.ndarray
    depth_i: np.ndarray
    depth_j: np.ndarray

    def __len__(self) -> int:
        return len(self.view_i)

    @classmethod
    def empty(cls) -> "CorrespondenceSet":
        z = np.zeros(0)
        return cls(
            np.zeros(0, dtype=np.int64), np.zeros((0, 2)),
            np.zeros(0, dtype=np.int64), np.zeros((0, 2)), z, z.copy(), z.copy(),
        )

    @classmethod
    def concatenate(cls, parts) -> "CorrespondenceSet":
        parts = [p for p in parts if len(p)]
        if not parts:
            return cls.empty()
        return cls(*(np.concatenate([getattr(p, f) for p in parts]) for f in (
            "view_i", "pixel_i", "view_j", "pixel_j", "ref_distance", "depth_i", "depth_j")))


@dataclass(frozen=True)
class MetricReport:
    overall: DepthMetrics
    per_view: tuple[DepthMetrics, ...]
    overlap: DepthMetrics | None
    depth_cons: float | None
    n_correspondences: int


def eigen_metrics(pred: DepthMap, gt: DepthMap, d_min: float = D_MIN_DEFAULT,
                  d_max: float = 200.0) -> DepthMetrics:
    """Abs Rel, Sq Rel, RMSE and delta < 1.25 over gt-valid pixels in range.

    Metric-scale evaluation: no median scaling, no clamping of predictions.
    """
    if pred.shape != gt.shape:
        raise DimensionError(f"pred {pred.shape} vs gt {gt.shape}")
    sel = gt.valid & (gt.values > d_min) & (gt.values <= d_max) & pred.valid
    if not sel.any():
        raise EmptyEvaluationError("no valid pixels to evaluate")
    p = pred.values[sel]
    g = gt.values[sel]
    diff = p - g
    abs_rel = float(np.mean(np.abs(diff) / g))
    sq_rel = float(np.mean(diff * diff / g))
    rmse = float(np.sqrt(np.mean(diff * diff)))
    ratio = np.maximum(p / g, g / p)
    delta1 = float(np.count_nonzero(ratio < 1.25) / len(ratio) * 100.0)
    return DepthMetrics(abs_rel, sq_rel, rmse, delta1, int(sel.sum()))


def adjacent_pairs(rig: CameraRig) -> list[tuple[int, int]]:
    """Ordered camera pairs whose view frusta can overlap.

    Uses the horizontal field-of-view wedges of the optical axes: pair
    (i, j) is adjacent when the azimuthal gap between the two forward
    directions is below the sum of the half-FOVs.  For an outward ring
    this yields each camera with its two neighbors.
    """
    pairs = []
    n = len(rig)
    fwd = [cam.pose.rotation[:, 2] for cam in rig.cameras]
    half = [np.arctan((cam.intrinsics.width - 1) / 2.0 / cam.intrinsics.fx) for cam in rig.cameras]
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            fi, fj = fwd[i][:2], fwd[j][:2]
            ni, nj = np.hypot(*fi), np.hypot(*fj)
            if ni < 1e-12 or nj < 1e-12:
                continue  # camera looks along the vertical axis; no azimuth wedge
            gap = np.arccos(np.clip(np.dot(fi, fj) / (ni * nj), -1.0, 1.0))
            if gap < half[i] + half[j]:
                pairs.append((i, j))
    return pairs


def _interp_disparity(depth: DepthMap, uv: np.ndarray):
    """Disparity-space bilinear sample of a depth map at continuous (N, 2) uv.

    Disparity (1/depth) is affine in pixel coordinates on planar surfaces,
    so the interpolation is exact there.  Exactly-integer landings read the
    pixel directly.  Returns (depth values, valid).
    """
    h, w = depth.shape
    u = uv[:, 0]
    v = uv[:, 1]
    inb = (u >= -BOUND_EPS) & (u <= w - 1 + BOUND_EPS) & (v >= -BOUND_EPS) & (v <= h - 1 + BOUND_EPS)
    u = np.clip(u, 0.0, w - 1.0)
    v = np.clip(v, 0.0, h - 1.0)

    x0 = np.clip(np.floor(u).astype(np.int64), 0, w - 1)
    y0 = np.clip(np.floor(v).astype(np.int64), 0, h - 1)
    wu = u - x0
    wv = v - y0
    exact = (wu == 0) & (wv == 0)
    x1 = np.clip(x0 + 1, 0, w - 1)
    y1 = np.clip(y0 + 1, 0, h - 1)

    vals = depth.values
    ok = depth.valid
    d00, d10 = vals[y0, x0], vals[y0, x1]
    d01, d11 = vals[y1, x0], vals[y1, x1]

    with np.errstate(divide="ignore"):
        q00 = np.where(d00 > 0, 1.0 / d00, 0.0)
        q10 = np.where(d10 > 0, 1.0 / d10, 0.0)
        q01 = np.where(d01 > 0, 1.0 / d01, 0.0)
        q11 = np.where(d11 > 0, 1.0 / d11, 0.0)

    disp = (
        q00 * (1 - wu) * (1 - wv)
        + q10 * wu * (1 - wv)
        + q01 * (1 - wu) * wv
        + q11 * wu * wv
    )
    patch_valid = ok[y0, x0] & ok[y0, x1] & ok[y1, x0] & ok[y1, x1]
    valid = inb & np.where(exact, ok[y0, x0], patch_valid) & (disp > 0)
    sampled = np.where(exact, np.where(d00 > 0, d00, np.inf), np.where(disp > 0, 1.0 / disp, np.inf))
    return sampled, valid


def find_correspondences(gt_depths: list[DepthMap], rig: CameraRig,
                         occlusion_tol: float = 0.05,
                         coincidence_tol: float = COINCIDENCE_TOL) -> CorrespondenceSet:
    """Pair gt-valid pixels across adjacent views, guarding against occlusion.

    Each valid pixel of view i is back-projected and dropped into every
    adjacent view j.  A pair is kept when view j's ground truth, sampled
    at the landing point, matches the projected depth within
    ``occlusion_tol`` (relative) AND the two back-projections coincide in
    3D within ``coincidence_tol`` meters.  The second check rejects
    interpolation across depth edges that the relative tolerance lets
    through; loosen it for curved or noisy ground truth.
    """
    if len(gt_depths) != len(rig):
        raise DimensionError(f"{len(gt_depths)} depth maps for {len(rig)} cameras")
    parts = []
    for i, j in adjacent_pairs(rig):
        gi = gt_depths[i]
        cam_i, cam_j = rig.cameras[i], rig.cameras[j]
        pts = backproject(gi, cam_i.intrinsics, cam_i.pose)
        uvz, proj_valid = project_to_view(pts, cam_j.intrinsics, cam_j.pose)
        sel = pts.valid & proj_valid
        if not sel.any():
            continue
        uv_j = uvz[..., :2][sel]
        z_j = uvz[..., 2][sel]
        sampled, samp_valid = _interp_disparity(gt_depths[j], uv_j)
        keep = samp_valid & (np.abs(sampled - z_j) <= occlusion_tol * z_j)
        if keep.any():
            p_i = pts.points[sel]
            p_j = unproject(uv_j, sampled, cam_j.intrinsics, cam_j.pose)
            gap = np.linalg.norm(np.where(keep[:, None], p_j - p_i, 0.0), axis=1)
            keep &= gap <= coincidence_tol
        if not keep.any():
            continue
        uu, vv = pixel_grid(cam_i.intrinsics)
        p3d = pts.points[sel][keep]
        parts.append(CorrespondenceSet(
            np.full(int(keep.sum()), i, dtype=np.int64),
            np.stack([uu[sel][keep], vv[sel][keep]], axis=1),
            np.full(int(keep.sum()), j, dtype=np.int64),
            uv_j[keep],
            np.linalg.norm(p3d, axis=1),
            gi.values[sel][keep],
            sampled[keep],
        ))
    return CorrespondenceSet.concatenate(parts)


def depth_consistency(pred_depths: list[DepthMap], corr: CorrespondenceSet,
                      rig: CameraRig) -> float:
    """RMSE between the two views' predicted point distances to the origin.

    For each pair, both predictions are back-projected through their own
    camera and reduced to Euclidean distances from the reference origin.
    Pairs whose prediction is invalid at the required pixels are skipped.
    """
    if len(corr) == 0:
        raise EmptyEvaluationError("no correspondences to evaluate")

    rho_i = np.zeros(len(corr))
    rho_j = np.zeros(len(corr))
    usable = np.zeros(len(corr), dtype=bool)
    for v in range(len(rig)):
        cam = rig.cameras[v]
        mi = corr.view_i == v
        if mi.any():
            u = corr.pixel_i[mi].astype(np.int64)
            d = pred_depths[v].values[u[:, 1], u[:, 0]]
            ok = pred_depths[v].valid[u[:, 1], u[:, 0]]
            pts = unproject(corr.pixel_i[mi], d, cam.intrinsics, cam.pose)
            rho_i[mi] = np.linalg.norm(pts, axis=1)
            usable[mi] = ok
        mj = corr.view_j == v
        if mj.any():
            d, ok = _interp_disparity(pred_depths[v], corr.pixel_j[mj])
            pts = unproject(corr.pixel_j[mj], d, cam.intrinsics, cam.pose)
            rho_j[mj] = np.linalg.norm(pts, axis=1)
            usable[mj] &= ok

    if not usable.any():
        raise EmptyEvaluationError("no correspondence has valid predictions on both sides")
    diff = rho_i[usable] - rho_j[usable]
    return float(np.sqrt(np.mean(diff * diff)))


def overlap_mask(rig: CameraRig, gt_depths: list[DepthMap],
                 corr: CorrespondenceSet | None = None) -> list[np.ndarray]:
    """Per-view masks of pixels participating in at least one correspondence."""
    if corr is None:
        corr = find_correspondences(gt_depths, rig)
    masks = [np.zeros(d.shape, dtype=bool) for d in gt_depths]
    if len(corr):
        ui = corr.pixel_i.astype(np.int64)
        for v in range(len(rig)):
            mi = corr.view_i == v
            masks[v][ui[mi, 1], ui[mi, 0]] = True
            mj = corr.view_j == v
            uj = np.rint(corr.pixel_j[mj]).astype(np.int64)
            h, w = masks[v].shape
            uj[:, 0] = np.clip(uj[:, 0], 0, w - 1)
            uj[:, 1] = np.clip(uj[:, 1], 0, h - 1)
            masks[v][uj[:, 1], uj[:, 0]] = True
    return masks


def _stack_depthmap(depths: list[DepthMap], extra_mask=None) -> DepthMap:
    values = np.concatenate([d.values.reshape(-1) for d in depths])[None, :]
    valid = np.concatenate([
        (d.valid if extra_mask is None else d.valid & extra_mask[i]).reshape(-1)
        for i, d in enumerate(depths)
    ])[None, :]
    return DepthMap(np.where(valid, values, 1.0), valid)


def evaluate(pred_depths: list[DepthMap], gt_depths: list[DepthMap], rig: CameraRig,
             d_min: float = D_MIN_DEFAULT, d_max: float = 200.0,
             occlusion_tol: float = 0.05) -> MetricReport:
    """Full evaluation: overall + per-view metrics, overlap split, consistency."""
    if not (len(pred_depths) == len(gt_depths) == len(rig)):
        raise DimensionError("pred, gt and rig must agree on the number of views")
    per_view = tuple(
        eigen_metrics(p, g, d_min, d_max) for p, g in zip(pred_depths, gt_depths)
    )
    overall = eigen_metrics(_stack_depthmap(pred_depths), _stack_depthmap(gt_depths), d_min, d_max)

    corr = find_correspondences(gt_depths, rig, occlusion_tol)
    overlap = None
    cons = None
    if len(corr):
        masks = overlap_mask(rig, gt_depths, corr)
        try:
            overlap = eigen_metrics(
                _stack_depthmap(pred_depths, masks), _stack_depthmap(gt_depths, masks), d_min, d_max
            )
        except EmptyEvaluationError:
            overlap = None
        cons = depth_consistency(pred_depths, corr, rig)
    return MetricReport(overall, per_view, overlap, cons, len(corr))
