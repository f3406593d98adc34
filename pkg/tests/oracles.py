"""Independent reference implementations used to cross-check the library.

The attention oracle enumerates ALL token pairs (O(T^2)), with the weight
conventions restated from scratch:

    token order   view-major, then row-major over jointly-valid pixels
    delta         (a.theta - b.theta wrapped into (-pi, pi], a.h - b.h)
    d^2           delta^T Sigma^-1 delta, Sigma^-1 via the 2x2 closed form
    a_sp          exp(-d^2/2) where d^2 <= tau^2, pair dropped otherwise
    a_f           cos(f_u, f_v), 0 for zero norms, clamped to [0, 1]
    self pair     weight forced to exactly 1

The expressions mirror the documented conventions so that agreement with
the binned construction is exact (same pairs, bit-identical weights); the
point of the oracle is the exhaustive pair enumeration, which shares no
code with the library's grid binning.
"""

import numpy as np

TWO_PI = 2.0 * np.pi


def wrap(delta):
    w = np.pi - np.mod(np.pi - delta, TWO_PI)
    return np.where(w <= -np.pi, w + TWO_PI, w)


def token_table(positions, features):
    thetas, hs, feats = [], [], []
    for pos, feat in zip(positions, features):
        m = pos.valid & feat.valid
        thetas.append(pos.theta[m])
        hs.append(pos.h[m])
        feats.append(feat.values[m])
    return np.concatenate(thetas), np.concatenate(hs), np.concatenate(feats, axis=0)


def brute_force_attention(positions, features, sigma, tau, use_similarity=True,
                          clamp=True, block=2048):
    """All-pairs truncated attention; returns (q, v, a_sp, a_f, weight)."""
    theta, h, feat = token_table(positions, features)
    n = len(theta)
    s = np.asarray(sigma, dtype=np.float64)
    det = s[0, 0] * s[1, 1] - s[0, 1] * s[1, 0]
    inv = np.array([[s[1, 1] / det, -s[0, 1] / det], [-s[1, 0] / det, s[0, 0] / det]])
    norms = np.sqrt(np.einsum("tf,tf->t", feat, feat))

    out = ([], [], [], [])
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        dt = wrap(theta[lo:hi, None] - theta[None, :])
        dh = h[lo:hi, None] - h[None, :]
        d_sq = dt * (inv[0, 0] * dt + inv[0, 1] * dh) + dh * (inv[1, 0] * dt + inv[1, 1] * dh)
        qi, vi = np.nonzero(d_sq <= tau * tau)
        a_sp = np.exp(-0.5 * d_sq[qi, vi])
        q = qi + lo
        if use_similarity:
            denom = norms[q] * norms[vi]
            dot = np.einsum("pf,pf->p", feat[q], feat[vi])
            sim = np.divide(dot, denom, out=np.zeros_like(dot), where=denom > 0)
            if clamp:
                sim = np.clip(sim, 0.0, 1.0)
        else:
            sim = np.ones_like(a_sp)
        self_pair = q == vi
        a_sp = np.where(self_pair, 1.0, a_sp)
        sim = np.where(self_pair, 1.0, sim)
        out[0].append(q)
        out[1].append(vi)
        out[2].append(a_sp)
        out[3].append(sim)

    q = np.concatenate(out[0])
    v = np.concatenate(out[1])
    a_sp = np.concatenate(out[2])
    sim = np.concatenate(out[3])
    return q, v, a_sp, sim, a_sp * sim


def random_attention_instance(rng, n_tokens, n_views=6, fdim=8, wrap_heavy=False,
                              h_span=3.0):
    """Random PositionMap/FeatureMap lists with ~n_tokens valid tokens total."""
    from rigdepth.attention import FeatureMap
    from rigdepth.cylinder import PositionMap

    per_view = int(np.ceil(n_tokens / n_views))
    w = int(np.ceil(np.sqrt(per_view)))
    hgt = int(np.ceil(per_view / w))
    positions, features = [], []
    budget = n_tokens
    for _ in range(n_views):
        take = min(budget, hgt * w)
        budget -= take
        valid = np.zeros(hgt * w, dtype=bool)
        valid[rng.permutation(hgt * w)[:take]] = True
        valid = valid.reshape(hgt, w)
        if wrap_heavy:
            theta = wrap(np.pi + rng.normal(0.0, 0.08, size=(hgt, w)))
        else:
            theta = rng.uniform(-np.pi, np.pi, size=(hgt, w))
        h = rng.uniform(-h_span / 2, h_span / 2, size=(hgt, w))
        f = rng.normal(size=(hgt, w, fdim))
        # a few zero-norm feature vectors exercise the similarity convention
        kill = rng.random((hgt, w)) < 0.02
        f[kill] = 0.0
        positions.append(PositionMap(theta, h, valid))
        features.append(FeatureMap(f, np.ones((hgt, w), dtype=bool)))
    return positions, features


def bilinear(image, u, v):
    """Plain reference bilinear sample (no validity logic), scalar or array."""
    image = np.asarray(image, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    x0 = np.floor(u).astype(int)
    y0 = np.floor(v).astype(int)
    wx = u - x0
    wy = v - y0
    h, w = image.shape[:2]
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x0 = np.clip(x0, 0, w - 1)
    y0 = np.clip(y0, 0, h - 1)
    if image.ndim == 3:
        wx = wx[..., None]
        wy = wy[..., None]
    return (
        image[y0, x0] * (1 - wx) * (1 - wy)
        + image[y0, x1] * wx * (1 - wy)
        + image[y1, x0] * (1 - wx) * wy
        + image[y1, x1] * wx * wy
    )
