"""Camera model, pose algebra, back-projection and warping.

Expected values are hand-computed in comments next to each assertion:
for K = [[fx, 0, cx], [0, fy, cy], [0, 0, 1]],
    K^-1 @ (u, v, 1) = ((u - cx)/fx, (v - cy)/fy, 1)
so a pixel at depth d back-projects to d * ((u - cx)/fx, (v - cy)/fy, 1).
"""

import numpy as np
import pytest

from rigdepth import (
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
    warp_spatial,
)
from rigdepth.errors import DimensionError, ParameterError

from oracles import bilinear


def _intr(fx=100.0, fy=100.0, cx=32.0, cy=32.0, w=64, h=64):
    return Intrinsics(fx, fy, cx, cy, w, h)


def _rotz(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _random_pose(rng):
    # Rotation from a normalized quaternion; always orthonormal, det +1.
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    rot = np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )
    return Pose.from_rt(rot, rng.uniform(-5, 5, size=3))


class TestIntrinsicsAndPoseValidation:
    def test_matrix_roundtrip(self):
        intr = _intr()
        np.testing.assert_allclose(intr.matrix() @ intr.inverse_matrix(), np.eye(3), atol=1e-15)

    def test_bad_focal_rejected(self):
        with pytest.raises(ParameterError):
            Intrinsics(0.0, 100.0, 32.0, 32.0, 64, 64)

    def test_principal_point_outside_rejected(self):
        with pytest.raises(ParameterError):
            Intrinsics(100.0, 100.0, 70.0, 32.0, 64, 64)

    def test_non_orthonormal_rotation_rejected(self):
        m = np.eye(4)
        m[0, 0] = 0.9
        with pytest.raises(ParameterError):
            Pose(m)

    def test_reflection_rejected(self):
        m = np.eye(4)
        m[0, 0] = -1.0  # det -1
        with pytest.raises(ParameterError):
            Pose(m)

    def test_bad_last_row_rejected(self):
        m = np.eye(4)
        m[3, 0] = 1e-6
        with pytest.raises(ParameterError):
            Pose(m)

    def test_group_laws(self, rng):
        for _ in range(50):
            a, b, c = (_random_pose(rng) for _ in range(3))
            ab_c = a.compose(b).compose(c).matrix
            a_bc = a.compose(b.compose(c)).matrix
            np.testing.assert_allclose(ab_c, a_bc, atol=1e-12)
            np.testing.assert_allclose(
                a.inverse().compose(a).matrix, np.eye(4), atol=1e-9
            )


class TestBackproject:
    def test_principal_ray(self):
        # depth 5 at the principal point, identity pose -> (0, 0, 5)
        intr = _intr()
        depth = DepthMap.from_values(np.full((64, 64), 5.0))
        pm = backproject(depth, intr, Pose.identity())
        np.testing.assert_allclose(pm.points[32, 32], [0.0, 0.0, 5.0], atol=1e-12)
        assert pm.valid.all()

    def test_unit_tangent_pixel(self):
        # K^-1 @ (cx + fx, cy, 1) = (1, 0, 1); times depth 4 -> (4, 0, 4)
        intr = _intr(fx=20.0, fy=20.0, cx=32.0, cy=32.0)
        depth = DepthMap.from_values(np.full((64, 64), 4.0))
        pm = backproject(depth, intr, Pose.identity())
        np.testing.assert_allclose(pm.points[32, 52], [4.0, 0.0, 4.0], atol=1e-12)

    def test_translation_shifts_all_points(self):
        intr = _intr()
        depth = DepthMap.from_values(np.full((64, 64), 3.0))
        base = backproject(depth, intr, Pose.identity())
        moved = backproject(depth, intr, Pose.from_rt(np.eye(3), (1.0, 2.0, 3.0)))
        np.testing.assert_allclose(moved.points, base.points + np.array([1.0, 2.0, 3.0]), atol=1e-12)

    def test_invalid_depth_propagates(self):
        intr = _intr()
        values = np.full((64, 64), 2.0)
        values[3, 7] = 0.0
        pm = backproject(DepthMap.from_values(values), intr, Pose.identity())
        assert not pm.valid[3, 7]
        assert pm.valid.sum() == 64 * 64 - 1

    def test_stride_pools_depth_and_centers(self):
        intr = _intr()
        values = np.arange(64 * 64, dtype=np.float64).reshape(64, 64) + 1.0
        pm = backproject(DepthMap.from_values(values), intr, Pose.identity(), stride=4)
        assert pm.points.shape == (16, 16, 3)
        # first cell: mean of the 4x4 window, pixel center at (1.5, 1.5)
        d = values[:4, :4].mean()
        np.testing.assert_allclose(
            pm.points[0, 0], [d * (1.5 - 32.0) / 100.0, d * (1.5 - 32.0) / 100.0, d], atol=1e-12
        )

    def test_stride_invalid_window(self):
        intr = _intr()
        values = np.full((64, 64), 2.0)
        values[5, 5] = np.nan
        pm = backproject(DepthMap.from_values(values), intr, Pose.identity(), stride=4)
        assert not pm.valid[1, 1]
        assert pm.valid.sum() == 16 * 16 - 1

    def test_non_divisible_stride_rejected(self):
        intr = _intr()
        depth = DepthMap.from_values(np.full((64, 64), 2.0))
        with pytest.raises(DimensionError):
            backproject(depth, intr, Pose.identity(), stride=5)


class TestProjectToView:
    def test_principal_axis_point(self):
        intr = _intr()
        pm = PointMap(np.array([[[0.0, 0.0, 5.0]]]), np.ones((1, 1), bool))
        uvz, valid = project_to_view(pm, intr, Pose.identity())
        np.testing.assert_allclose(uvz[0, 0], [32.0, 32.0, 5.0], atol=1e-12)
        assert valid[0, 0]

    def test_behind_camera_invalid(self):
        intr = _intr()
        pm = PointMap(np.array([[[0.0, 0.0, -1.0]]]), np.ones((1, 1), bool))
        _, valid = project_to_view(pm, intr, Pose.identity())
        assert not valid[0, 0]

    def test_outside_bounds_invalid(self):
        intr = _intr()
        pm = PointMap(np.array([[[50.0, 0.0, 5.0]]]), np.ones((1, 1), bool))
        _, valid = project_to_view(pm, intr, Pose.identity())
        assert not valid[0, 0]

    def test_roundtrip_random_cameras(self, rng):
        # project_to_view o backproject == identity on pixel centers
        for _ in range(20):
            fx, fy = rng.uniform(40, 400, size=2)
            w, h = 40, 30
            intr = Intrinsics(fx, fy, rng.uniform(1, w - 1), rng.uniform(1, h - 1), w, h)
            pose = _random_pose(rng)
            depth = DepthMap.from_values(rng.uniform(0.5, 50.0, size=(h, w)))
            uvz, valid = project_to_view(backproject(depth, intr, pose), intr, pose)
            uu, vv = pixel_grid(intr)
            assert valid.all()
            assert np.abs(uvz[..., 0] - uu).max() < 1e-6
            assert np.abs(uvz[..., 1] - vv).max() < 1e-6
            np.testing.assert_allclose(uvz[..., 2], depth.values, rtol=1e-9)


class TestBilinearSample:
    def test_exact_grid_points(self, rng):
        img = rng.random((8, 10))
        uv = np.array([[3.0, 4.0], [9.0, 7.0], [0.0, 0.0]])
        vals, valid = bilinear_sample(img, uv)
        assert valid.all()  # zero-weight taps on the far edge are not required
        np.testing.assert_array_equal(vals, img[[4, 7, 0], [3, 9, 0]])

    def test_out_of_bounds_not_clamped(self, rng):
        img = rng.random((8, 10))
        _, valid = bilinear_sample(img, np.array([[-0.001, 2.0], [9.001, 2.0], [2.0, 7.5]]))
        assert not valid.any()

    def test_matches_reference(self, rng):
        img = rng.random((16, 12, 3))
        uv = np.stack([rng.uniform(0, 11, 200), rng.uniform(0, 15, 200)], axis=1)
        vals, valid = bilinear_sample(img, uv)
        assert valid.all()
        np.testing.assert_allclose(vals, bilinear(img, uv[:, 0], uv[:, 1]), atol=1e-12)


class TestWarpSpatial:
    def test_identity_warp(self, rng):
        intr = _intr()
        img = rng.random((64, 64, 3))
        depth = DepthMap.from_values(rng.uniform(1.0, 20.0, size=(64, 64)))
        warped, mask = warp_spatial(depth, img, intr, intr, Pose.identity())
        assert mask.all()
        np.testing.assert_allclose(warped, img, atol=1e-12)

    def test_fronto_parallel_disparity(self):
        # plane at depth d, baseline b along x, shared K -> shift fx*b/d px
        intr = _intr()
        d, b = 5.0, 0.5
        depth = DepthMap.from_values(np.full((64, 64), d))
        relpose = Pose.from_rt(np.eye(3), (-b, 0.0, 0.0))
        pts = backproject(depth, intr, Pose.identity())
        pts_j = PointMap(relpose.transform(pts.points), pts.valid)
        uvz, valid = project_to_view(pts_j, intr, Pose.identity())
        uu, _ = pixel_grid(intr)
        shift = (uvz[..., 0] - uu)[valid]
        expected = intr.fx * (-b) / d  # -10 px
        assert np.abs(shift - expected).max() < 0.01

        # the warped raster equals the source sampled at u + fx*b/d
        rng = np.random.default_rng(3)
        img = rng.random((64, 64, 3))
        warped, mask = warp_spatial(depth, img, intr, intr, relpose)
        uu, vv = pixel_grid(intr)
        ref = bilinear(img, uu + expected, vv)
        np.testing.assert_allclose(warped[mask], ref[mask], atol=1e-9)
        # border columns that sample outside the source are masked off
        assert not mask[:, :10].any()
        assert mask[:, 11:].all()

    def test_intensity_linearity(self, rng):
        intr = _intr()
        depth = DepthMap.from_values(rng.uniform(2.0, 10.0, size=(64, 64)))
        relpose = Pose.from_rt(_rotz(0.05), (0.2, -0.1, 0.05))
        x = rng.random((64, 64, 3))
        y = rng.random((64, 64, 3))
        a, b = 0.7, -0.3
        wx, _ = warp_spatial(depth, x, intr, intr, relpose)
        wy, _ = warp_spatial(depth, y, intr, intr, relpose)
        wxy, _ = warp_spatial(depth, a * x + b * y, intr, intr, relpose)
        np.testing.assert_allclose(wxy, a * wx + b * wy, atol=1e-12)

    def test_dimension_mismatch_rejected(self, rng):
        intr = _intr()
        depth = DepthMap.from_values(np.full((32, 64), 2.0))
        with pytest.raises(DimensionError):
            warp_spatial(depth, rng.random((64, 64, 3)), intr, intr, Pose.identity())


class TestPoseComposition:
    def test_temporal_identity_motion(self):
        cam_to_front = Pose.from_rt(_rotz(1.0), (0.3, 0.4, 0.0))
        out = compose_temporal_pose(Pose.identity(), cam_to_front)
        np.testing.assert_allclose(out.matrix, np.eye(4), atol=1e-12)

    def test_temporal_front_camera_itself(self):
        motion = Pose.from_rt(_rotz(0.2), (1.0, 0.0, 0.5))
        out = compose_temporal_pose(motion, Pose.identity())
        np.testing.assert_allclose(out.matrix, motion.matrix, atol=1e-15)

    def test_temporal_yawed_side_camera(self):
        # front moves by (1,0,0); side camera yawed +90 deg about z.
        # T^-1 @ T_front @ T with T = R_z(90):
        #   rotation: R^T @ I @ R = I
        #   translation: R^T @ (1,0,0) = (cos(-90), sin(-90), 0) = (0,-1,0)
        motion = Pose.from_rt(np.eye(3), (1.0, 0.0, 0.0))
        cam_to_front = Pose.from_rt(_rotz(np.pi / 2), (0.0, 0.0, 0.0))
        out = compose_temporal_pose(motion, cam_to_front)
        np.testing.assert_allclose(out.rotation, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(out.translation, [0.0, -1.0, 0.0], atol=1e-12)

    def test_spatiotemporal_identities(self):
        spatial = Pose.from_rt(_rotz(0.4), (0.1, 0.2, 0.3))
        out = compose_spatiotemporal_pose(Pose.identity(), spatial)
        np.testing.assert_allclose(out.matrix, spatial.matrix, atol=1e-15)
        out = compose_spatiotemporal_pose(spatial, Pose.identity())
        np.testing.assert_allclose(out.matrix, spatial.matrix, atol=1e-15)

    def test_spatiotemporal_translations_add(self):
        a = Pose.from_rt(np.eye(3), (1.0, 2.0, 3.0))
        b = Pose.from_rt(np.eye(3), (0.5, -1.0, 0.25))
        out = compose_spatiotemporal_pose(a, b)
        np.testing.assert_allclose(out.translation, [1.5, 1.0, 3.25], atol=1e-15)
