"""Non-learned spatial attention over cylindrical position maps.

Every valid pixel of every view becomes a token.  A pair (u, v) receives

    d^2     = delta^T Sigma^-1 delta          (delta = wrapped geodesic displacement)
    a_sp    = exp(-d^2 / 2)   if d^2 <= tau^2, else 0 (pair not stored)
    a_f     = cosine similarity of the feature vectors (clamped to [0, 1])
    a       = a_sp * a_f

and attended features are ``f'_u = sum_v a_uv f_v`` (optionally normalized
by ``sum_v a_uv``).  The self pair is always stored with weight exactly 1.

Construction buckets tokens into an azimuth/height grid whose cells are at
least as large as the truncation ellipse half-extents
(``tau * sqrt(sigma_tt)``, ``tau * sqrt(sigma_hh)``), so each query only
inspects its 3x3 cell neighborhood (with azimuth wrap-around).  The result
is identical to the exhaustive O(T^2) construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cylinder import PositionMap, wrap_angle
from .errors import DimensionError, ParameterError, TokenMismatchError

_TWO_PI = 2.0 * np.pi

DEFAULT_SIGMA = np.diag([0.02, 0.02])
DEFAULT_TAU = 1.2


@dataclass(frozen=True)
class FeatureMap:
    """Dense per-view feature raster (H, W, F) with a validity mask."""

    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        m = np.asarray(self.valid, dtype=bool)
        if v.ndim != 3 or v.shape[2] < 1:
            raise DimensionError(f"features must be (H, W, F) with F >= 1, got {v.shape}")
        if m.shape != v.shape[:2]:
            raise DimensionError(f"feature mask {m.shape} does not match raster {v.shape[:2]}")
        if not np.all(np.isfinite(v)):
            raise ParameterError("feature values must be finite")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "valid", m)

    @property
    def shape(self):
        return self.values.shape


def _inv2x2(sigma) -> np.ndarray:
    s = np.asarray(sigma, dtype=np.float64)
    if s.shape != (2, 2):
        raise ParameterError(f"covariance must be 2x2, got {s.shape}")
    det = s[0, 0] * s[1, 1] - s[0, 1] * s[1, 0]
    if not np.isfinite(det) or det <= 0 or s[0, 0] <= 0:
        raise ParameterError("covariance must be symmetric positive definite")
    return np.array([[s[1, 1] / det, -s[0, 1] / det], [-s[1, 0] / det, s[0, 0] / det]])


@dataclass(frozen=True)
class AttentionParams:
    """Non-learned attention configuration.

    ``sigma`` is the 2x2 covariance of the Gaussian kernel over (dtheta, dh);
    ``tau`` truncates at Mahalanobis distance d <= tau.  ``normalize`` and
    ``clamp_similarity`` select the aggregation / similarity variants.
    """

    sigma: np.ndarray = field(default_factory=lambda: DEFAULT_SIGMA.copy())
    tau: float = DEFAULT_TAU
    normalize: bool = False
    clamp_similarity: bool = True

    def __post_init__(self):
        s = np.asarray(self.sigma, dtype=np.float64)
        _inv2x2(s)  # validates SPD
        if np.abs(s - s.T).max() > 1e-12:
            raise ParameterError("covariance must be symmetric")
        if not self.tau > 0:
            raise ParameterError(f"truncation threshold must be positive, got {self.tau}")
        s = s.copy()
        s.flags.writeable = False
        object.__setattr__(self, "sigma", s)


@dataclass(frozen=True)
class SparseAttention:
    """Truncated pairwise weights over all tokens of all views, CSR-like.

    Tokens enumerate valid pixels view-major, row-major.  For query token q,
    its pairs live in ``indptr[q]:indptr[q+1]`` of ``neighbor_ids`` /
    ``spatial`` / ``similarity`` / ``weight``, sorted by neighbor id.
    """

    grid_shape: tuple[int, int]
    n_views: int
    token_view: np.ndarray
    token_row: np.ndarray
    token_col: np.ndarray
    indptr: np.ndarray
    neighbor_ids: np.ndarray
    spatial: np.ndarray
    similarity: np.ndarray
    weight: np.ndarray

    @property
    def n_tokens(self) -> int:
        return len(self.token_view)

    @property
    def n_pairs(self) -> int:
        return len(self.neighbor_ids)


def mahalanobis_sq(delta, sigma) -> float:
    """Quadratic form ``delta^T Sigma^-1 delta`` for a 2-vector displacement."""
    d = np.asarray(delta, dtype=np.float64).reshape(2)
    inv = _inv2x2(sigma)
    d0, d1 = d[0], d[1]
    return float(d0 * (inv[0, 0] * d0 + inv[0, 1] * d1) + d1 * (inv[1, 0] * d0 + inv[1, 1] * d1))


def spatial_weight(d_sq: float, tau: float) -> float:
    """Truncated Gaussian: ``exp(-d^2/2)`` for ``d^2 <= tau^2``, else 0."""
    if d_sq < 0:
        raise ParameterError("squared distance must be nonnegative")
    if d_sq > tau * tau:
        return 0.0
    return float(np.exp(-0.5 * d_sq))


def feature_similarity(f_u, f_v, clamp: bool = True) -> float:
    """Cosine similarity; zero-norm vectors yield 0; clamped to [0, 1] if asked."""
    a = np.asarray(f_u, dtype=np.float64)
    b = np.asarray(f_v, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"feature vectors differ in shape: {a.shape} vs {b.shape}")
    na = np.sqrt(np.einsum("i,i->", a, a))
    nb = np.sqrt(np.einsum("i,i->", b, b))
    denom = na * nb
    if denom == 0:
        return 0.0
    sim = np.einsum("i,i->", a, b) / denom
    if clamp:
        sim = min(max(sim, 0.0), 1.0)
    return float(sim)


def _token_table(positions: list[PositionMap], features: list[FeatureMap]):
    """Flatten valid pixels of all views into token arrays (view-major, row-major)."""
    if len(positions) != len(features):
        raise DimensionError(f"{len(positions)} position maps vs {len(features)} feature maps")
    if not positions:
        raise DimensionError("at least one view is required")
    grid = positions[0].shape
    fdim = features[0].shape[2]
    views, rows, cols, thetas, hs, feats = [], [], [], [], [], []
    for i, (pos, feat) in enumerate(zip(positions, features)):
        if pos.shape != grid or feat.shape[:2] != grid or feat.shape[2] != fdim:
            raise DimensionError("all views must share one raster shape and feature dimension")
        m = pos.valid & feat.valid
        r, c = np.nonzero(m)
        views.append(np.full(len(r), i, dtype=np.int64))
        rows.append(r.astype(np.int64))
        cols.append(c.astype(np.int64))
        thetas.append(pos.theta[m])
        hs.append(pos.h[m])
        feats.append(feat.values[m])
    return (
        grid,
        np.concatenate(views),
        np.concatenate(rows),
        np.concatenate(cols),
        np.concatenate(thetas),
        np.concatenate(hs),
        np.concatenate(feats, axis=0),
    )


def pair_weights(
    theta_u, theta_v, h_u, h_v, feat_u, feat_v, norm_u, norm_v, inv, use_similarity, clamp
):
    """Weight components for prepared pair arrays (shared by build paths).

    Keeping this in one place guarantees the binned construction and any
    exhaustive reference produce bit-identical weights for the same pairs.
    """
    dt = wrap_angle(theta_u - theta_v)
    dh = h_u - h_v
    d_sq = dt * (inv[0, 0] * dt + inv[0, 1] * dh) + dh * (inv[1, 0] * dt + inv[1, 1] * dh)
    a_sp = np.exp(-0.5 * d_sq)
    if use_similarity:
        denom = norm_u * norm_v
        dot = np.einsum("pf,pf->p", feat_u, feat_v)
        sim = np.divide(dot, denom, out=np.zeros_like(dot), where=denom > 0)
        if clamp:
            sim = np.clip(sim, 0.0, 1.0)
    else:
        sim = np.ones_like(a_sp)
    return d_sq, a_sp, sim


def build_sparse_attention(
    positions: list[PositionMap],
    features: list[FeatureMap],
    params: AttentionParams,
    use_similarity: bool = True,
) -> SparseAttention:
    """Construct the truncated attention graph via azimuth/height binning.

    Equals the exhaustive all-pairs construction exactly: binning only
    prunes candidates that cannot pass the ``d^2 <= tau^2`` test.
    """
    grid, t_view, t_row, t_col, theta, h, feat = _token_table(positions, features)
    n = len(theta)
    inv = _inv2x2(params.sigma)
    empty = np.zeros(0)
    if n == 0:
        return SparseAttention(
            grid, len(positions), t_view, t_row, t_col,
            np.zeros(1, dtype=np.int64), np.zeros(0, dtype=np.int64), empty, empty, empty,
        )

    # Azimuth cells tile 2*pi evenly (wrap-around is a plain modulo) and are
    # kept strictly wider than the truncation half-extents by dropping one
    # cell from the exact tiling, so a +/-1 cell neighborhood always covers
    # the ellipse even at float boundaries.
    dt_max = params.tau * np.sqrt(params.sigma[0, 0])
    dh_max = params.tau * np.sqrt(params.sigma[1, 1])
    n_t = max(1, int(_TWO_PI / dt_max) - 1) if dt_max < _TWO_PI else 1
    h_lo = h.min()
    h_span = h.max() - h_lo
    n_h = max(1, int(h_span / dh_max) - 1) if h_span > 0 else 1

    # A tight kernel on few tokens would make the grid needlessly huge;
    # widening cells beyond the half-extents stays correct, so cap the
    # cell count at a small multiple of the token count.
    budget = max(1024, 8 * n)
    if n_t * n_h > budget:
        shrink = np.sqrt(budget / (n_t * n_h))
        n_t = max(1, int(n_t * shrink))
        n_h = max(1, int(n_h * shrink))

    it = np.minimum(((theta + np.pi) * (n_t / _TWO_PI)).astype(np.int64), n_t - 1)
    ih = (
        np.minimum(((h - h_lo) * (n_h / h_span)).astype(np.int64), n_h - 1)
        if h_span > 0
        else np.zeros(n, dtype=np.int64)
    )
    cell = it * n_h + ih

    order = np.argsort(cell, kind="stable")
    counts = np.bincount(cell, minlength=n_t * n_h)
    cell_start = np.concatenate([[0], np.cumsum(counts)])

    # Wrapped azimuth offsets degenerate for tiny grids: with 2 columns the
    # -1 and +1 neighbors coincide, with 1 column there is only one cell.
    dt_offsets = (-1, 0, 1) if n_t >= 3 else ((0, 1) if n_t == 2 else (0,))
    all_q, all_v = [], []
    for dti in dt_offsets:
        nb_it = (it + dti) % n_t
        for dhi in (-1, 0, 1):
            nb_ih = ih + dhi
            sel = np.nonzero((nb_ih >= 0) & (nb_ih < n_h))[0]
            if len(sel) == 0:
                continue
            nb_cell = nb_it[sel] * n_h + nb_ih[sel]
            c = counts[nb_cell]
            nz = c > 0
            sel, nb_cell, c = sel[nz], nb_cell[nz], c[nz]
            if len(sel) == 0:
                continue
            total = int(c.sum())
            group_ofs = np.concatenate([[0], np.cumsum(c)[:-1]])
            within = np.arange(total) - np.repeat(group_ofs, c)
            all_q.append(np.repeat(sel, c))
            all_v.append(order[np.repeat(cell_start[nb_cell], c) + within])

    q = np.concatenate(all_q)
    v = np.concatenate(all_v)
    ord2 = np.lexsort((v, q))
    q, v = q[ord2], v[ord2]

    norms = np.sqrt(np.einsum("tf,tf->t", feat, feat))
    d_sq, a_sp, sim = pair_weights(
        theta[q], theta[v], h[q], h[v], feat[q], feat[v], norms[q], norms[v],
        inv, use_similarity, params.clamp_similarity,
    )
    keep = d_sq <= params.tau * params.tau
    q, v, a_sp, sim = q[keep], v[keep], a_sp[keep], sim[keep]

    # The self pair is special-cased to weight exactly 1 (identity fallback,
    # robust to zero-norm features).
    self_pair = q == v
    a_sp = np.where(self_pair, 1.0, a_sp)
    sim = np.where(self_pair, 1.0, sim)
    weight = a_sp * sim

    indptr = np.concatenate([[0], np.cumsum(np.bincount(q, minlength=n))]).astype(np.int64)
    return SparseAttention(grid, len(positions), t_view, t_row, t_col, indptr, v, a_sp, sim, weight)


def identity_attention(positions: list[PositionMap], features: list[FeatureMap]) -> SparseAttention:
    """Attention reduced to the identity: each token attends only to itself."""
    grid, t_view, t_row, t_col, _, _, _ = _token_table(positions, features)
    n = len(t_view)
    ones = np.ones(n)
    return SparseAttention(
        grid, len(positions), t_view, t_row, t_col,
        np.arange(n + 1, dtype=np.int64), np.arange(n, dtype=np.int64), ones, ones.copy(), ones.copy(),
    )


def aggregate(
    features: list[FeatureMap], attn: SparseAttention, normalize: bool = False
) -> list[FeatureMap]:
    """Apply attended feature aggregation ``f'_u = sum_v a_uv f_v``.

    With ``normalize`` the sum is divided by ``sum_v a_uv``.  Tokens keep
    their raster positions; invalid pixels pass through unchanged.
    """
    if len(features) != attn.n_views:
        raise TokenMismatchError(f"attention built for {attn.n_views} views, got {len(features)}")
    grid = features[0].shape[:2]
    if grid != tuple(attn.grid_shape):
        raise TokenMismatchError(f"attention built on grid {attn.grid_shape}, features are {grid}")
    n = attn.n_tokens
    if n and (attn.token_row.max() >= grid[0] or attn.token_col.max() >= grid[1]):
        raise TokenMismatchError("token coordinates exceed the feature raster")

    out = [FeatureMap(f.values.copy(), f.valid.copy()) for f in features]
    if n == 0:
        return out

    flat = np.stack([f.values for f in features], axis=0)  # (N, H, W, F)
    token_feat = flat[attn.token_view, attn.token_row, attn.token_col]
    gathered = attn.weight[:, None] * token_feat[attn.neighbor_ids]
    sums = np.add.reduceat(gathered, attn.indptr[:-1], axis=0)
    if normalize:
        wsum = np.add.reduceat(attn.weight, attn.indptr[:-1])
        sums = sums / wsum[:, None]
    for i, fm in enumerate(out):
        mine = attn.token_view == i
        fm.values[attn.token_row[mine], attn.token_col[mine]] = sums[mine]
    return out
