import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from mvassoc.errors import EstimationError, NoOverlapError, PointAtInfinityError
from mvassoc.geometry import (
    CameraCalibration,
    GroundGrid,
    Homography,
    apply_homography,
    compute_pair_homography,
    dlt_homography,
    estimate_homography_ransac,
    generate_ground_grid,
    project_point_h,
    project_points,
    project_points_masked,
    rodrigues,
    rotation_to_rvec,
    scale_calibration,
    symmetric_transfer_error,
)

from conftest import (
    guaranteed_outliers,
    lookat_calibration,
    lookat_rotation,
    make_calibration,
    planar_correspondences,
    random_projective_matrix,
)

_rvec_components = st.floats(-3.0, 3.0, allow_nan=False)


class TestRodrigues:
    def test_zero_vector_is_identity(self):
        np.testing.assert_allclose(rodrigues((0, 0, 0)), np.eye(3))

    def test_half_turn_about_z(self):
        np.testing.assert_allclose(
            rodrigues((0, 0, math.pi)), np.diag([-1.0, -1.0, 1.0]), atol=1e-9
        )

    @given(st.tuples(_rvec_components, _rvec_components, _rvec_components))
    def test_orthonormal_unit_determinant(self, rvec):
        R = rodrigues(rvec)
        np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-9)
        assert abs(np.linalg.det(R) - 1.0) < 1e-9

    @given(
        st.tuples(_rvec_components, _rvec_components, _rvec_components),
        st.floats(1e-6, 1.0 - 1e-9),
    )
    def test_round_trip_below_pi(self, direction, norm_frac):
        d = np.asarray(direction)
        if np.linalg.norm(d) < 1e-6:
            d = np.array([1.0, 0.0, 0.0])
        rvec = d / np.linalg.norm(d) * (norm_frac * math.pi)
        recovered = rotation_to_rvec(rodrigues(rvec))
        assert np.linalg.norm(recovered - rvec) < 1e-9

    def test_matches_scipy_both_directions(self, rng):
        for _ in range(200):
            rvec = rng.normal(size=3)
            rvec *= rng.uniform(0, math.pi * 0.999) / np.linalg.norm(rvec)
            np.testing.assert_allclose(
                rodrigues(rvec),
                Rotation.from_rotvec(rvec).as_matrix(),
                atol=1e-12,
            )
            R = Rotation.random(random_state=np.random.RandomState(rng.integers(2**31)))
            np.testing.assert_allclose(
                rotation_to_rvec(R.as_matrix()),
                R.as_rotvec(),
                atol=1e-9,
            )

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            rodrigues((np.nan, 0, 0))


class TestProjection:
    def test_optical_axis_hits_principal_point(self):
        calib = make_calibration(focal=500.0, size=(640, 480), tvec=(0, 0, 0))
        pix = project_points([[0.0, 0.0, 1.0]], calib)
        np.testing.assert_allclose(pix, [[320.0, 240.0]])

    def test_similar_triangles(self):
        K = np.array([[100.0, 0, 0], [0, 100.0, 0], [0, 0, 1.0]])
        calib = CameraCalibration(1, K, np.zeros(3), np.zeros(3), (1000, 1000))
        pix = project_points([[1.0, 0.0, 5.0]], calib)
        np.testing.assert_allclose(pix, [[20.0, 0.0]])

    def test_behind_camera_dropped_not_faulted(self):
        calib = make_calibration(tvec=(0, 0, 0))
        pts = [[0, 0, 1.0], [0, 0, -1.0], [0.1, 0, 2.0]]
        pix = project_points(pts, calib)
        assert pix.shape == (2, 2)
        pix_all, in_front = project_points_masked(pts, calib)
        assert in_front.tolist() == [True, False, True]
        assert np.isnan(pix_all[1]).all()

    def test_full_grid_against_reference_implementation(self):
        # Camera posed like a surveillance unit over the walking area.
        calib = lookat_calibration(
            1, position=(-6.0, -14.0, 6.0), target=(3.0, 3.0, 0.0),
            focal=1200.0, size=(1920, 1080),
        )
        grid = generate_ground_grid(GroundGrid(rows=90, cols=60, spacing=0.4))
        pix, in_front = project_points_masked(grid, calib)
        assert in_front.all()
        assert np.isfinite(pix).all()

        # Independent plain-loop pinhole as the reference.
        R = lookat_rotation((-6.0, -14.0, 6.0), (3.0, 3.0, 0.0))
        K, t = calib.K, calib.tvec
        for idx in (0, 17, 1234, len(grid) - 1):
            Xc = R @ grid[idx] + t
            u = (K[0, 0] * Xc[0] + K[0, 2] * Xc[2]) / Xc[2]
            v = (K[1, 1] * Xc[1] + K[1, 2] * Xc[2]) / Xc[2]
            np.testing.assert_allclose(pix[idx], [u, v], atol=1e-9)


class TestGroundGrid:
    def test_default_point_count(self):
        assert generate_ground_grid().shape == (691_200, 3)

    def test_first_point_is_origin_at_elevation(self):
        pts = generate_ground_grid()
        np.testing.assert_allclose(pts[0], [-3.0, -9.0, 1.0])

    def test_zero_units_on_ground_plane(self):
        pts = generate_ground_grid(GroundGrid(rows=3, cols=2, z_units=0))
        assert (pts[:, 2] == 0).all()

    def test_x_varies_fastest(self):
        pts = generate_ground_grid(GroundGrid(rows=3, cols=2))
        np.testing.assert_allclose(pts[1, :2], [-3.0 + 0.025, -9.0])
        np.testing.assert_allclose(pts[2, :2], [-3.0, -9.0 + 0.025])

    def test_empty_grid_is_configuration_fault(self):
        with pytest.raises(ValueError):
            generate_ground_grid(GroundGrid(rows=0))


class TestDLT:
    def test_exact_recovery_minimal_and_overdetermined(self, rng):
        for n in (4, 50):
            H_true = random_projective_matrix(rng)
            src, dst = planar_correspondences(rng, H_true, n)
            H = dlt_homography(src, dst)
            np.testing.assert_allclose(
                H / H[2, 2], H_true / H_true[2, 2], atol=1e-8
            )

    def test_collinear_points_rejected(self):
        src = np.array([[0.0, 0], [1, 0], [2, 0], [3, 0]])
        with pytest.raises(EstimationError):
            dlt_homography(src, src)

    def test_too_few_points(self):
        pts = np.array([[0.0, 0], [1, 0], [0, 1]])
        with pytest.raises(EstimationError):
            dlt_homography(pts, pts)


class TestProjectPointH:
    def test_identity(self):
        h = Homography(np.eye(3))
        assert project_point_h(h, (5.0, 7.0)) == (5.0, 7.0)

    def test_scaling(self):
        h = Homography(np.diag([2.0, 2.0, 1.0]))
        assert project_point_h(h, (3.0, 4.0)) == (6.0, 8.0)

    def test_translation(self):
        H = np.eye(3)
        H[0, 2], H[1, 2] = 10.0, -5.0
        assert project_point_h(Homography(H), (0.0, 0.0)) == (10.0, -5.0)

    def test_point_at_infinity(self):
        H = np.array([[1.0, 0, 0], [0, 1.0, 0], [0, -1.0, 1.0]])
        with pytest.raises(PointAtInfinityError):
            project_point_h(Homography(H), (0.0, 1.0))

    def test_inverse_composition_is_identity(self, rng):
        for _ in range(50):
            h = Homography(random_projective_matrix(rng))
            p = tuple(rng.uniform(0, 1000, 2))
            q = project_point_h(h, p)
            back = project_point_h(h.inverse(), q)
            assert math.hypot(back[0] - p[0], back[1] - p[1]) < 1e-9


class TestRansac:
    def test_src_equals_dst_gives_identity(self, rng):
        pts = rng.uniform(0, 1000, (20, 2))
        h = estimate_homography_ransac(pts, pts, seed=3)
        np.testing.assert_allclose(h.H, np.eye(3), atol=1e-9)
        assert h.inlier_count == 20

    def test_pure_scaling(self, rng):
        src = rng.uniform(0, 500, (30, 2))
        h = estimate_homography_ransac(src, 2.0 * src, seed=3)
        np.testing.assert_allclose(h.H, np.diag([2.0, 2.0, 1.0]), atol=1e-8)

    def test_outlier_rejection_synthetic_oracle(self, rng):
        # 100 exact planar correspondences plus 30 guaranteed outliers.
        for trial in range(10):
            H_true = random_projective_matrix(rng)
            src_in, dst_in = planar_correspondences(rng, H_true, 100)
            src_out, dst_out = guaranteed_outliers(rng, H_true, 30, 10.0)
            src = np.vstack([src_in, src_out])
            dst = np.vstack([dst_in, dst_out])
            h = estimate_homography_ransac(src, dst, threshold_px=10.0, seed=trial)
            err = np.linalg.norm(
                apply_homography(h.H, src_in) - dst_in, axis=1
            )
            assert err.max() < 1e-6
            assert h.inlier_count >= 100

    def test_deterministic_given_seed(self, rng):
        H_true = random_projective_matrix(rng)
        src, dst = planar_correspondences(rng, H_true, 60)
        src_out, dst_out = guaranteed_outliers(rng, H_true, 20, 10.0)
        src = np.vstack([src, src_out])
        dst = np.vstack([dst, dst_out])
        h1 = estimate_homography_ransac(src, dst, seed=11)
        h2 = estimate_homography_ransac(src, dst, seed=11)
        assert (h1.H == h2.H).all()
        assert h1.inlier_count == h2.inlier_count
        mask1 = symmetric_transfer_error(h1.H, src, dst) <= 10.0
        mask2 = symmetric_transfer_error(h2.H, src, dst) <= 10.0
        assert (mask1 == mask2).all()

    def test_too_few_correspondences(self):
        pts = np.zeros((3, 2))
        with pytest.raises(EstimationError):
            estimate_homography_ransac(pts, pts)

    def test_all_collinear_fails(self):
        src = np.column_stack([np.arange(10.0), np.arange(10.0)])
        with pytest.raises(EstimationError):
            estimate_homography_ransac(src, src, max_iters=50)


def _plane_induced_homography(calib_a, calib_b, elevation):
    """Closed-form homography via the plane Z = elevation (the oracle)."""

    def plane_to_pixels(calib):
        R = rodrigues(calib.rvec)
        return calib.K @ np.column_stack(
            [R[:, 0], R[:, 1], elevation * R[:, 2] + calib.tvec]
        )

    G_a = plane_to_pixels(calib_a)
    G_b = plane_to_pixels(calib_b)
    H = G_b @ np.linalg.inv(G_a)
    return H / H[2, 2]


_TEST_GRID = GroundGrid(rows=90, cols=90, spacing=0.1, origin=(-4.5, -4.5), z_units=10)


class TestPairHomography:
    def test_identical_cameras_give_identity(self):
        calib = lookat_calibration(1, position=(8.0, 3.0, 5.0))
        h = compute_pair_homography(calib, calib, grid=_TEST_GRID)
        np.testing.assert_allclose(h.H, np.eye(3), atol=1e-8)

    def test_matches_closed_form_plane_homography(self):
        calib_a = lookat_calibration(1, position=(8.0, 3.0, 5.0))
        calib_b = lookat_calibration(2, position=(2.0, 8.5, 6.0))
        h = compute_pair_homography(calib_a, calib_b, grid=_TEST_GRID)
        expected = _plane_induced_homography(calib_a, calib_b, _TEST_GRID.elevation)
        np.testing.assert_allclose(h.H, expected, atol=1e-6)
        assert h.inlier_count > 0
        assert (h.src_camera, h.dst_camera) == (1, 2)

    def test_no_overlap_error(self):
        # Two cameras looking at opposite far-away targets see no common
        # grid point.
        calib_a = lookat_calibration(1, position=(8.0, 0.0, 5.0), target=(100.0, 0.0, 0.0))
        calib_b = lookat_calibration(2, position=(-8.0, 0.0, 5.0), target=(-100.0, 0.0, 0.0))
        with pytest.raises(NoOverlapError):
            compute_pair_homography(calib_a, calib_b, grid=_TEST_GRID)


class TestScaleCalibration:
    def test_unit_scale_is_identity(self):
        calib = make_calibration(size=(1920, 1080))
        scaled = scale_calibration(calib, 1.0)
        np.testing.assert_allclose(scaled.K, calib.K)
        assert scaled.image_size == calib.image_size

    def test_two_thirds_reaches_working_resolution(self):
        calib = make_calibration(size=(1920, 1080))
        scaled = scale_calibration(calib, 2.0 / 3.0)
        assert scaled.image_size == (1280, 720)

    def test_projection_scales_linearly(self, rng):
        calib = lookat_calibration(1, position=(7.0, 2.0, 5.0), size=(1920, 1080))
        scaled = scale_calibration(calib, 2.0 / 3.0)
        pts = np.column_stack(
            [rng.uniform(-2, 2, 25), rng.uniform(-2, 2, 25), rng.uniform(0, 1.8, 25)]
        )
        np.testing.assert_allclose(
            project_points(pts, scaled),
            project_points(pts, calib) * (2.0 / 3.0),
            atol=1e-9,
        )

    def test_non_positive_scale_rejected(self):
        with pytest.raises(ValueError):
            scale_calibration(make_calibration(), 0.0)


class TestTypes:
    def test_homography_requires_invertible(self):
        with pytest.raises(ValueError):
            Homography(np.zeros((3, 3)))

    def test_homography_canonical_scale(self):
        h = Homography(2.0 * np.eye(3))
        assert h.H[2, 2] == 1.0

    def test_calibration_validation(self):
        K = np.eye(3)
        K[1, 0] = 5.0
        with pytest.raises(ValueError):
            CameraCalibration(1, K, np.zeros(3), np.zeros(3), (10, 10))
        with pytest.raises(ValueError):
            CameraCalibration(1, np.eye(3), np.zeros(3), np.zeros(3), (0, 10))
        bad_focal = np.diag([-1.0, 1.0, 1.0])
        with pytest.raises(ValueError):
            CameraCalibration(1, bad_focal, np.zeros(3), np.zeros(3), (10, 10))
