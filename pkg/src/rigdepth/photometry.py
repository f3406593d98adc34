"""Self-supervision losses as evaluable functionals (no training, no autograd).

The photometric loss blends structural similarity and L1 color difference:

    L = mean over valid pixels of  alpha * (1 - SSIM) / 2 + (1 - alpha) * |x - y|

SSIM uses 3x3 box statistics computed over partial windows (no padding is
fabricated at raster borders), constants C1 = 0.01^2 and C2 = 0.03^2 on
unit-range intensities.  Masked means divide by the number of valid pixels,
not by H*W, because warping produces invalid pixels; pixels whose SSIM
window touches an invalid sample are excluded from the mean.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import metrics as _metrics
from .errors import DimensionError, NoOverlapError, ParameterError
from .rig import DepthMap, warp_spatial

SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2


@dataclass(frozen=True)
class LossWeights:
    """Weights of the total loss; temporal photometric term has weight 1."""

    lambda_sp: float = 0.03
    lambda_spt: float = 0.1
    lambda_sm: float = 0.1
    lambda_dccl: float = 1e-3
    lambda_mvrcl: float = 0.2
    alpha: float = 0.85

    def __post_init__(self):
        for name in ("lambda_sp", "lambda_spt", "lambda_sm", "lambda_dccl", "lambda_mvrcl"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be nonnegative")
        if not 0.0 <= self.alpha <= 1.0:
            raise ParameterError(f"alpha must be in [0, 1], got {self.alpha}")


def _box3_sum(x: np.ndarray) -> np.ndarray:
    """Sum of each pixel's 3x3 window clipped to the raster (integral image)."""
    h, w = x.shape[:2]
    c = np.zeros((h + 1, w + 1) + x.shape[2:], dtype=np.float64)
    c[1:, 1:] = x.cumsum(axis=0).cumsum(axis=1)
    r = np.arange(h)
    q = np.arange(w)
    r0 = np.maximum(r - 1, 0)
    r1 = np.minimum(r + 2, h)
    q0 = np.maximum(q - 1, 0)
    q1 = np.minimum(q + 2, w)
    return c[np.ix_(r1, q1)] - c[np.ix_(r0, q1)] - c[np.ix_(r1, q0)] + c[np.ix_(r0, q0)]


def _box3_mean(x: np.ndarray) -> np.ndarray:
    h, w = x.shape[:2]
    rows = np.minimum(np.arange(h) + 2, h) - np.maximum(np.arange(h) - 1, 0)
    cols = np.minimum(np.arange(w) + 2, w) - np.maximum(np.arange(w) - 1, 0)
    count = rows[:, None] * cols[None, :]
    if x.ndim == 3:
        count = count[..., None]
    return _box3_sum(x) / count


def _as_image(x) -> np.ndarray:
    img = np.asarray(x, dtype=np.float64)
    if img.ndim == 2:
        img = img[..., None]
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise DimensionError(f"image must be (H, W) or (H, W, C) with C in {{1, 3}}, got {img.shape}")
    return img


def ssim(x, y) -> np.ndarray:
    """Per-pixel SSIM map in [-1, 1], averaged over channels."""
    a = _as_image(x)
    b = _as_image(y)
    if a.shape != b.shape:
        raise DimensionError(f"SSIM inputs differ in shape: {a.shape} vs {b.shape}")
    mu_a = _box3_mean(a)
    mu_b = _box3_mean(b)
    mu_aa = _box3_mean(a * a)
    mu_bb = _box3_mean(b * b)
    mu_ab = _box3_mean(a * b)
    var_a = mu_aa - mu_a * mu_a
    var_b = mu_bb - mu_b * mu_b
    cov = mu_ab - mu_a * mu_b
    s = ((2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2)) / (
        (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2)
    )
    return np.clip(s.mean(axis=2), -1.0, 1.0)


def photometric_loss(warped, target, mask=None, alpha: float = 0.85) -> float:
    """Masked mean of the alpha-blended SSIM / L1 photometric error.

    The mean runs over pixels whose whole (in-bounds) 3x3 SSIM window is
    valid, so invalid warped samples never leak into the statistics.
    Raises ``NoOverlapError`` when no such pixel exists.
    """
    a = _as_image(warped)
    b = _as_image(target)
    if a.shape != b.shape:
        raise DimensionError(f"photometric inputs differ in shape: {a.shape} vs {b.shape}")
    h, w = a.shape[:2]
    if mask is None:
        mask = np.ones((h, w), dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (h, w):
        raise DimensionError(f"mask {mask.shape} does not match images {(h, w)}")

    window_ok = _box3_sum(mask.astype(np.float64)) == _box3_sum(np.ones((h, w)))
    eff = mask & window_ok
    if not eff.any():
        raise NoOverlapError("photometric comparison has no valid pixels")

    l1 = np.abs(a - b).mean(axis=2)
    per_pixel = alpha * (1.0 - ssim(a, b)) / 2.0 + (1.0 - alpha) * l1
    return float(per_pixel[eff].mean())


def smoothness_loss(depth, image) -> float:
    """Edge-aware smoothness of mean-normalized disparity.

    Forward differences (last row/column excluded); image gradients are
    channel-averaged before the ``exp(-|grad I|)`` edge weight.
    """
    d = depth.values if isinstance(depth, DepthMap) else np.asarray(depth, dtype=np.float64)
    img = _as_image(image)
    if d.shape != img.shape[:2]:
        raise DimensionError(f"depth {d.shape} does not match image {img.shape[:2]}")
    if not np.all(d > 0):
        raise ParameterError("smoothness needs strictly positive depth")

    disp = 1.0 / d
    disp = disp / disp.mean()
    ddx = np.abs(disp[:, 1:] - disp[:, :-1])
    ddy = np.abs(disp[1:, :] - disp[:-1, :])
    idx = np.abs(img[:, 1:] - img[:, :-1]).mean(axis=2)
    idy = np.abs(img[1:, :] - img[:-1, :]).mean(axis=2)
    return float((ddx * np.exp(-idx)).mean() + (ddy * np.exp(-idy)).mean())


def total_loss(parts: dict, weights: LossWeights) -> float:
    """Weighted sum of the loss terms; the temporal term is required.

    Recognized keys: ``temporal``, ``spatial``, ``spatiotemporal``,
    ``smoothness``, ``dccl``, ``mvrcl`` (the last two are externally
    supplied scalars and default to 0).
    """
    if "temporal" not in parts:
        raise ParameterError("total loss requires the temporal photometric term")
    known = {"temporal", "spatial", "spatiotemporal", "smoothness", "dccl", "mvrcl"}
    unknown = set(parts) - known
    if unknown:
        raise ParameterError(f"unknown loss terms: {sorted(unknown)}")
    get = lambda k: float(parts.get(k, 0.0))
    return (
        get("temporal")
        + weights.lambda_sp * get("spatial")
        + weights.lambda_spt * get("spatiotemporal")
        + weights.lambda_sm * get("smoothness")
        + weights.lambda_dccl * get("dccl")
        + weights.lambda_mvrcl * get("mvrcl")
    )


def spatial_photometric_loss(bundle, rig, depths=None, alpha: float = 0.85) -> float:
    """Mean photometric loss over all ordered spatially-adjacent view pairs.

    ``bundle`` provides images and (ground-truth) depths; ``depths``
    optionally overrides the depth maps used for warping.
    """
    pairs = _metrics.adjacent_pairs(rig)
    if not pairs:
        raise NoOverlapError("rig has no spatially adjacent camera pairs")
    depths = bundle.depths if depths is None else depths
    losses = []
    for i, j in pairs:
        warped, mask = warp_spatial(
            depths[i],
            bundle.images[j],
            rig.cameras[i].intrinsics,
            rig.cameras[j].intrinsics,
            rig.relative_pose(i, j),
        )
        losses.append(photometric_loss(warped, bundle.images[i], mask, alpha))
    return float(np.mean(losses))


def probe_depth_scale(scene, rig, scales) -> list[tuple[float, float]]:
    """Spatial photometric loss with depth = s * ground truth, per scale s.

    A self-supervision sanity probe: on rendered scenes the curve must
    attain its minimum at s = 1.
    """
    from . import synthworld  # local import; synthworld builds on this module's siblings

    scales = [float(s) for s in scales]
    if any(s <= 0 for s in scales):
        raise ParameterError("depth scales must be positive")
    bundle = synthworld.render(replace(scene, rig=rig))
    curve = []
    for s in scales:
        scaled = [d.scaled(s) for d in bundle.depths]
        curve.append((s, spatial_photometric_loss(bundle, rig, scaled)))
    return curve
