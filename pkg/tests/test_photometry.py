"""Loss functionals: SSIM, photometric blend, smoothness, total loss, probe."""

import numpy as np
import pytest

from rigdepth import (
    CameraRig,
    LossWeights,
    photometric_loss,
    probe_depth_scale,
    smoothness_loss,
    ssim,
    total_loss,
)
from rigdepth.errors import DimensionError, NoOverlapError, ParameterError
from rigdepth.photometry import SSIM_C1, SSIM_C2

ALPHA = 0.85


class TestSsim:
    def test_self_similarity_is_one(self, rng):
        x = rng.random((12, 17, 3))
        np.testing.assert_array_equal(ssim(x, x), np.ones((12, 17)))

    def test_constant_images_closed_form(self):
        # zero variance: SSIM = (2*m1*m2 + C1) / (m1^2 + m2^2 + C1)
        m1, m2 = 0.3, 0.7
        x = np.full((6, 8, 3), m1)
        y = np.full((6, 8, 3), m2)
        expected = (2 * m1 * m2 + SSIM_C1) / (m1 * m1 + m2 * m2 + SSIM_C1)
        np.testing.assert_allclose(ssim(x, y), expected, atol=1e-12)

    def test_symmetry(self, rng):
        x = rng.random((9, 9, 3))
        y = rng.random((9, 9, 3))
        np.testing.assert_array_equal(ssim(x, y), ssim(y, x))

    def test_range(self, rng):
        x = rng.random((20, 20, 1))
        y = rng.random((20, 20, 1))
        s = ssim(x, y)
        assert (s >= -1.0).all() and (s <= 1.0).all()

    def test_shape_mismatch(self, rng):
        with pytest.raises(DimensionError):
            ssim(rng.random((4, 4, 3)), rng.random((4, 5, 3)))


class TestPhotometricLoss:
    def test_identical_images_zero(self, rng):
        x = rng.random((16, 16, 3))
        assert photometric_loss(x, x, alpha=ALPHA) == 0.0

    def test_pure_l1_constant_offset(self):
        x = np.full((8, 8, 3), 0.3)
        y = np.full((8, 8, 3), 0.2)
        assert photometric_loss(x, y, alpha=0.0) == pytest.approx(0.1, abs=1e-12)

    def test_two_pixel_alpha_blend(self):
        # 1x2 single-channel raster; every 3x3 window covers both pixels.
        a, b = 0.2, 0.6  # warped
        c, d = 0.3, 0.5  # target
        mu_x, mu_y = (a + b) / 2, (c + d) / 2
        var_x = (a * a + b * b) / 2 - mu_x * mu_x
        var_y = (c * c + d * d) / 2 - mu_y * mu_y
        cov = (a * c + b * d) / 2 - mu_x * mu_y
        s = ((2 * mu_x * mu_y + SSIM_C1) * (2 * cov + SSIM_C2)) / (
            (mu_x**2 + mu_y**2 + SSIM_C1) * (var_x + var_y + SSIM_C2)
        )
        l1 = (abs(a - c) + abs(b - d)) / 2
        expected = ALPHA * (1 - s) / 2 + (1 - ALPHA) * l1

        warped = np.array([[a, b]])[..., None]
        target = np.array([[c, d]])[..., None]
        assert photometric_loss(warped, target, alpha=ALPHA) == pytest.approx(expected, abs=1e-12)

    def test_mask_restricts_mean_and_window(self):
        # invalid pixels are excluded along with every window touching them
        warped = np.zeros((5, 9, 1))
        target = np.zeros((5, 9, 1))
        warped[:, 6:] = 0.7  # garbage in the masked-out region
        mask = np.ones((5, 9), dtype=bool)
        mask[:, 6:] = False
        # windows of columns 0..4 never touch column 6; column 5 does
        assert photometric_loss(warped, target, mask, alpha=ALPHA) == 0.0

    def test_empty_mask_raises(self, rng):
        x = rng.random((4, 4, 3))
        with pytest.raises(NoOverlapError):
            photometric_loss(x, x, np.zeros((4, 4), dtype=bool))

    def test_ssim_term_symmetric_under_swap(self, rng):
        x = rng.random((10, 10, 3))
        y = rng.random((10, 10, 3))
        # with alpha = 1 the loss is the pure SSIM term, symmetric in x, y
        assert photometric_loss(x, y, alpha=1.0) == pytest.approx(
            photometric_loss(y, x, alpha=1.0), abs=1e-15
        )

    def test_nonnegative(self, rng):
        for _ in range(10):
            x = rng.random((7, 7, 3))
            y = rng.random((7, 7, 3))
            assert photometric_loss(x, y, alpha=ALPHA) >= 0.0


class TestSmoothness:
    def test_constant_depth_zero(self, rng):
        img = rng.random((10, 10, 3))
        assert smoothness_loss(np.full((10, 10), 7.0), img) == 0.0

    def test_image_edge_downweights_depth_step(self):
        depth = np.full((8, 8), 5.0)
        depth[:, 4:] = 10.0
        flat = np.full((8, 8, 3), 0.5)
        edged = flat.copy()
        edged[:, 4:] = 1.0  # hard image edge coincides with the depth step
        assert smoothness_loss(depth, edged) < smoothness_loss(depth, flat)

    def test_global_scale_invariance(self, rng):
        depth = rng.uniform(2.0, 9.0, size=(12, 12))
        img = rng.random((12, 12, 3))
        base = smoothness_loss(depth, img)
        assert smoothness_loss(2.0 * depth, img) == pytest.approx(base, rel=1e-12)
        assert smoothness_loss(depth / 3.0, img) == pytest.approx(base, rel=1e-12)

    def test_nonpositive_depth_rejected(self, rng):
        img = rng.random((4, 4, 3))
        with pytest.raises(ParameterError):
            smoothness_loss(np.zeros((4, 4)), img)


class TestTotalLoss:
    def test_all_zero(self):
        assert total_loss({"temporal": 0.0}, LossWeights()) == 0.0

    def test_temporal_only(self):
        assert total_loss({"temporal": 1.0}, LossWeights()) == 1.0

    def test_weighted_sum_example(self):
        # 0.5 + 0.03 * 1 = 0.53
        val = total_loss({"temporal": 0.5, "spatial": 1.0}, LossWeights())
        assert val == pytest.approx(0.53, abs=1e-12)

    def test_all_terms(self):
        w = LossWeights()
        parts = {
            "temporal": 0.4,
            "spatial": 0.2,
            "spatiotemporal": 0.1,
            "smoothness": 0.3,
            "dccl": 2.0,
            "mvrcl": 0.5,
        }
        expected = 0.4 + 0.03 * 0.2 + 0.1 * 0.1 + 0.1 * 0.3 + 1e-3 * 2.0 + 0.2 * 0.5
        assert total_loss(parts, w) == pytest.approx(expected, abs=1e-15)

    def test_missing_temporal_rejected(self):
        with pytest.raises(ParameterError):
            total_loss({"spatial": 1.0}, LossWeights())

    def test_unknown_term_rejected(self):
        with pytest.raises(ParameterError):
            total_loss({"temporal": 0.0, "bogus": 1.0}, LossWeights())

    def test_negative_weight_rejected(self):
        with pytest.raises(ParameterError):
            LossWeights(lambda_sp=-0.1)
        with pytest.raises(ParameterError):
            LossWeights(alpha=1.5)


class TestProbeDepthScale:
    def test_minimum_at_unit_scale_plane(self, plane_scene, ring_rig):
        scales = [0.5, 0.8, 0.9, 1.0, 1.1, 1.25, 2.0]
        curve = probe_depth_scale(plane_scene, ring_rig, scales)
        losses = dict(curve)
        assert min(losses, key=losses.get) == 1.0
        assert losses[1.0] < 0.02

    def test_monotone_increase_above_unit(self, plane_scene, ring_rig):
        curve = probe_depth_scale(plane_scene, ring_rig, [1.0, 1.25, 1.5, 2.0])
        losses = [v for _, v in curve]
        assert all(a < b for a, b in zip(losses, losses[1:]))

    def test_single_camera_no_overlap(self, ring_rig, plane_scene):
        solo = CameraRig((ring_rig.cameras[0],))
        with pytest.raises(NoOverlapError):
            probe_depth_scale(plane_scene, solo, [1.0])

    def test_nonpositive_scale_rejected(self, plane_scene, ring_rig):
        with pytest.raises(ParameterError):
            probe_depth_scale(plane_scene, ring_rig, [-1.0])
