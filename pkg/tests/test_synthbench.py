import numpy as np
import pytest

from rigpose.exceptions import InvalidSpread, PointAtInfinity, ZeroTranslation
from rigpose.geometry import Pose, plucker_line, pose_essential
from rigpose.constraints import ac_residuals
from rigpose.synthbench import (
    BENCH_COLUMNS,
    SceneConfig,
    ac_to_three_pcs,
    affine_from_homography,
    generate_scene,
    inlier_threshold,
    noisy_ac,
    pose_errors,
    run_noise_sweep,
    write_bench_csv,
)
from tests.test_geometry import axis_angle_rotation


@pytest.fixture(scope="module")
def scene():
    return generate_scene(SceneConfig(seed=21, rot_range_deg=(5, 30)))


class TestSceneConfig:
    def test_defaults_echo_protocol_constants(self):
        cfg = SceneConfig()
        assert cfg.baseline_m == 1.0
        assert cfg.motion_length_m == 3.0
        assert (cfg.image_width, cfg.image_height) == (640, 480)
        assert cfg.focal_px == 400.0
        assert cfg.principal_point == (320.0, 240.0)
        assert cfg.cube_min == (-5.0, -5.0, 10.0)
        assert cfg.cube_max == (5.0, 5.0, 20.0)
        assert cfg.n_ground_plane_acs == 50
        assert cfg.n_random_plane_acs == 50
        assert cfg.support_side_px == 40.0

    def test_validation(self):
        with pytest.raises(ValueError):
            SceneConfig(motion_type="diagonal")
        with pytest.raises(ValueError):
            SceneConfig(baseline_m=-1.0)
        with pytest.raises(ValueError):
            SceneConfig(cube_min=(0, 0, 10), cube_max=(-1, 5, 20))


class TestGenerateScene:
    def test_counts_and_routings(self, scene):
        assert len(scene.acs) == 200
        assert len(scene.indices("inter")) == 100
        assert len(scene.indices("intra")) == 100

    def test_points_inside_cube(self, scene):
        lo = np.array(scene.cfg.cube_min)
        hi = np.array(scene.cfg.cube_max)
        for rec in scene.acs:
            assert np.all(rec.point >= lo - 1e-9)
            assert np.all(rec.point <= hi + 1e-9)

    def test_noise_free_residuals(self, scene):
        worst = 0.0
        for rec in scene.acs:
            E = pose_essential(scene.rig, scene.gt_pose, rec.ac.cam_view1, rec.ac.cam_view2)
            E = E / np.linalg.norm(E)
            worst = max(worst, np.abs(ac_residuals(E, rec.ac)).max())
        assert worst < 1e-10

    def test_gt_depths_place_point_on_rays(self, scene):
        for rec in scene.acs[:20]:
            line1 = plucker_line(scene.rig, rec.ac.cam_view1, rec.ac.x)
            assert np.abs(line1.point_at(rec.depths[0]) - rec.point).max() < 1e-9
            X2 = scene.gt_pose.apply(rec.point)
            line2 = plucker_line(scene.rig, rec.ac.cam_view2, rec.ac.x_prime)
            assert np.abs(line2.point_at(rec.depths[1]) - X2).max() < 1e-9

    def test_points_on_their_planes(self, scene):
        for rec in scene.acs:
            n, d = rec.plane
            assert abs(n @ rec.point - d) < 1e-9

    def test_determinism(self):
        s1 = generate_scene(SceneConfig(seed=5))
        s2 = generate_scene(SceneConfig(seed=5))
        assert np.array_equal(s1.gt_pose.rotation, s2.gt_pose.rotation)
        for a, b in zip(s1.acs, s2.acs):
            assert np.array_equal(a.ac.x, b.ac.x)
            assert np.array_equal(a.ac.A, b.ac.A)

    def test_projections_in_frame(self, scene):
        w, h = scene.cfg.image_width, scene.cfg.image_height
        for rec in scene.acs:
            assert 0 <= rec.x_px[0] <= w - 1 and 0 <= rec.x_px[1] <= h - 1
            assert 0 <= rec.xp_px[0] <= w - 1 and 0 <= rec.xp_px[1] <= h - 1


class TestAffineFromHomography:
    def test_identity(self):
        x = np.array([0.3, -0.2, 1.0])
        assert np.allclose(affine_from_homography(np.eye(3), x), np.eye(2))

    def test_uniform_scaling_at_origin(self):
        H = np.diag([2.0, 2.0, 1.0])
        x = np.array([0.0, 0.0, 1.0])
        assert np.allclose(affine_from_homography(H, x), 2.0 * np.eye(2))

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        step = 1e-6
        for _ in range(50):
            H = np.eye(3) + 0.3 * rng.normal(size=(3, 3))
            x = np.array([rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), 1.0])
            if abs(H[2] @ x) < 0.3:
                continue
            A = affine_from_homography(H, x)

            def fmap(pt2):
                v = H @ np.array([pt2[0], pt2[1], 1.0])
                return v[:2] / v[2]

            for k in range(2):
                e = np.zeros(2)
                e[k] = step
                fd = (fmap(x[:2] + e) - fmap(x[:2] - e)) / (2 * step)
                assert np.abs(A[:, k] - fd).max() < 1e-5

    def test_point_at_infinity(self):
        H = np.array([[1.0, 0, 0], [0, 1.0, 0], [0, 0, 0]])
        with pytest.raises(PointAtInfinity):
            affine_from_homography(H, np.array([0.0, 0.0, 1.0]))


class TestNoisyAc:
    def test_sigma_zero_reproduces_exact_affine(self, scene):
        rng = np.random.default_rng(0)
        for i in (0, 5, 101):
            ac = noisy_ac(scene, i, 0.0, 40.0, rng)
            ref = scene.acs[i].ac
            assert np.abs(ac.x - ref.x).max() < 1e-12
            assert np.abs(ac.A - ref.A).max() < 1e-10 * max(np.abs(ref.A).max(), 1.0)

    def test_deterministic_per_seed(self, scene):
        a1 = noisy_ac(scene, 3, 0.75, 40.0, np.random.default_rng(9))
        a2 = noisy_ac(scene, 3, 0.75, 40.0, np.random.default_rng(9))
        assert np.array_equal(a1.x, a2.x)
        assert np.array_equal(a1.A, a2.A)

    def test_larger_support_less_affine_noise(self, scene):
        # Monte-Carlo: the 40 px support square must beat the 30 px one
        rng40 = np.random.default_rng(1)
        rng30 = np.random.default_rng(1)
        pert40, pert30 = [], []
        for _ in range(5):
            for i in scene.indices("inter"):
                ref = scene.acs[i].ac
                a40 = noisy_ac(scene, i, 0.5, 40.0, rng40)
                a30 = noisy_ac(scene, i, 0.5, 30.0, rng30)
                pert40.append(np.linalg.norm(a40.A - ref.A))
                pert30.append(np.linalg.norm(a30.A - ref.A))
        assert np.median(pert40) < np.median(pert30)


class TestAcToThreePcs:
    def test_identity_affine(self, scene):
        ac = scene.pixel_ac(0)
        # overwrite with a clean synthetic AC in pixel units
        from rigpose.constraints import AffineCorrespondence

        ac = AffineCorrespondence(
            np.array([100.0, 100.0, 1.0]), np.array([200.0, 50.0, 1.0]), np.eye(2), 0, 1
        )
        pcs = ac_to_three_pcs(ac, 10.0)
        v1 = [p[0] for p in pcs]
        v2 = [p[1] for p in pcs]
        assert np.allclose(v1, [[100, 100], [110, 100], [100, 110]])
        assert np.allclose(v2, [[200, 50], [210, 50], [200, 60]])

    def test_anisotropic_affine(self):
        from rigpose.constraints import AffineCorrespondence

        ac = AffineCorrespondence(
            np.array([0.0, 0.0, 1.0]), np.array([0.0, 0.0, 1.0]), np.array([[2.0, 0.0], [0.0, 1.0]]), 0, 1
        )
        pcs = ac_to_three_pcs(ac, 10.0)
        assert np.allclose(pcs[1][1], [20.0, 0.0])
        assert np.allclose(pcs[2][1], [0.0, 10.0])

    def test_invalid_spread(self, scene):
        with pytest.raises(InvalidSpread):
            ac_to_three_pcs(scene.pixel_ac(0), 0.0)


class TestPoseErrors:
    def test_identical(self, scene):
        eps = pose_errors(scene.gt_pose, scene.gt_pose)
        assert eps[0] == 0.0 and eps[1] == 0.0
        assert eps[2] < 1e-5  # arccos roundoff at a unit dot product

    def test_double_translation(self, scene):
        gt = scene.gt_pose
        est = Pose(gt.rotation, 2.0 * gt.translation)
        eps = pose_errors(gt, est)
        assert abs(eps[1] - 2.0 / 3.0) < 1e-12
        assert eps[2] < 1e-5

    def test_rotated_90deg(self, scene):
        gt = Pose(np.eye(3), np.array([1.0, 0, 0]))
        est = Pose(axis_angle_rotation([0, 0, 1.0], np.pi / 2), np.array([1.0, 0, 0]))
        assert abs(pose_errors(gt, est)[0] - 90.0) < 1e-9

    def test_zero_translation(self, scene):
        gt = Pose(np.eye(3), np.zeros(3))
        with pytest.raises(ZeroTranslation):
            pose_errors(gt, gt)


class TestBenchRows:
    def test_columns_and_determinism(self, tmp_path):
        rows = run_noise_sweep(
            [0.0, 0.5], trials=2, solvers=("2ac-inter",), master_seed=3, real_timing=False
        )
        assert len(rows) == 4
        assert all(tuple(r.keys()) == tuple(BENCH_COLUMNS) for r in rows)
        rows2 = run_noise_sweep(
            [0.0, 0.5], trials=2, solvers=("2ac-inter",), master_seed=3, real_timing=False
        )
        assert rows == rows2
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_bench_csv(p1, rows)
        write_bench_csv(p2, rows2)
        assert p1.read_bytes() == p2.read_bytes()
        header = p1.read_text().splitlines()[0]
        assert header == ",".join(BENCH_COLUMNS)

    def test_inlier_threshold_scaling(self):
        assert inlier_threshold(0.0, 400.0) == 1e-4
        assert inlier_threshold(0.5, 400.0) == 5e-3
        assert inlier_threshold(1.0, 400.0) == 1e-2
