import numpy as np
import pytest

from rigpose.constraints import (
    AffineCorrespondence,
    ac_residuals,
    build_constraint_matrix,
    build_equation_system,
    essential_in_depths,
    load_correspondences,
    save_correspondences,
)
from rigpose.exceptions import DegenerateInput, MissingAnglePrior
from rigpose.geometry import (
    plucker_line,
    pose_essential,
    relative_camera_pose,
    rotation_angle,
    rotation_to_cayley,
)
from rigpose.polysolver import normalized_residual
from rigpose.synthbench import SceneConfig, generate_scene


@pytest.fixture(scope="module")
def scene():
    return generate_scene(SceneConfig(seed=42, rot_range_deg=(5, 30)))


def gt_setup(scene, mode="inter"):
    idx = scene.indices(mode)[:2]
    recs = [scene.acs[i] for i in idx]
    acs = [r.ac for r in recs]
    q_gt = rotation_to_cayley(scene.gt_pose.rotation)
    return recs, acs, q_gt


class TestEssentialInDepths:
    def test_single_camera_at_origin(self):
        from tests.test_geometry import simple_rig

        rig = simple_rig()
        x = np.array([0.1, -0.2, 1.0])
        xp = np.array([-0.3, 0.15, 1.0])
        ac = AffineCorrespondence(x, xp, np.eye(2), 0, 0)
        triple = essential_in_depths(rig, ac, np.eye(3))
        p = x / np.linalg.norm(x)
        pp = xp / np.linalg.norm(xp)
        from rigpose.geometry import skew

        assert np.abs(triple.E_lam1 + skew(p)).max() < 1e-15
        assert np.abs(triple.E_lam2 - skew(pp)).max() < 1e-15
        assert np.abs(triple.at(0.0, 0.0) - triple.E_const).max() == 0.0

    def test_matches_composed_essential_at_gt(self, scene):
        # depth-linear form (anchored at the correspondence) vs the
        # four-transform composition: must agree at the true depths
        recs, acs, _ = gt_setup(scene)
        rec, ac = recs[0], acs[0]
        R = scene.gt_pose.rotation
        triple = essential_in_depths(scene.rig, ac, R)
        lam1, lam2 = rec.depths
        line1 = plucker_line(scene.rig, ac.cam_view1, ac.x)
        line2 = plucker_line(scene.rig, ac.cam_view2, ac.x_prime)
        t1 = line1.point_at(lam1)
        t2 = line2.point_at(lam2)
        _, E_ref = relative_camera_pose(scene.rig, ac.cam_view1, ac.cam_view2, R, t1, t2)
        scale = max(np.abs(E_ref).max(), 1.0)
        assert np.abs(triple.at(lam1, lam2) - E_ref).max() < 1e-12 * scale


class TestAcResiduals:
    def test_zero_at_ground_truth(self, scene):
        for rec in scene.acs:
            E = pose_essential(scene.rig, scene.gt_pose, rec.ac.cam_view1, rec.ac.cam_view2)
            E = E / np.linalg.norm(E)
            assert np.abs(ac_residuals(E, rec.ac)).max() < 1e-10

    def test_ray_through_epipole(self):
        from rigpose.geometry import skew

        E = skew(np.array([0.0, 0.0, 1.0]))
        x = np.array([0.0, 0.0, 1.0])
        ac = AffineCorrespondence(x, x, np.eye(2), 0, 0)
        assert ac_residuals(E, ac)[0] == 0.0

    def test_linearity_in_E(self, scene):
        rec = scene.acs[0]
        E = pose_essential(scene.rig, scene.gt_pose, rec.ac.cam_view1, rec.ac.cam_view2)
        r1 = ac_residuals(E, rec.ac)
        r2 = ac_residuals(3.5 * E, rec.ac)
        assert np.abs(r2 - 3.5 * r1).max() < 1e-12 * max(np.abs(E).max(), 1.0)


class TestConstraintMatrix:
    def test_dimensions(self, scene):
        _, acs, _ = gt_setup(scene)
        assert build_constraint_matrix(scene.rig, acs, anchor=0, dof=6).shape == (5, 3)
        assert build_constraint_matrix(scene.rig, acs, anchor=0, dof=5).shape == (4, 3)

    @pytest.mark.parametrize("mode", ["inter", "intra"])
    @pytest.mark.parametrize("anchor", [0, 1])
    def test_annihilates_gt_depth_vector(self, scene, mode, anchor):
        recs, acs, q_gt = gt_setup(scene, mode)
        F = build_constraint_matrix(scene.rig, acs, anchor=anchor, dof=6)
        lam1, lam2 = recs[anchor].depths
        v = np.array([lam1, lam2, 1.0])
        Fn = F.evaluate(q_gt)
        scale = np.abs(Fn).max() * np.linalg.norm(v)
        assert np.abs(Fn @ v).max() < 1e-9 * scale

    def test_anchor_epipolar_row_vanishes_symbolically(self, scene):
        # the excluded row: build it by hand and check all coefficients die
        from rigpose.constraints import _constraint_rows, _symbolic_triple

        recs, acs, _ = gt_setup(scene)
        ac = acs[0]
        l1 = plucker_line(scene.rig, ac.cam_view1, ac.x)
        l2 = plucker_line(scene.rig, ac.cam_view2, ac.x_prime)
        E_cols = _symbolic_triple(scene.rig, ac.cam_view1, ac.cam_view2, l1, l2)
        row = _constraint_rows(E_cols, ac, include_epipolar=True, n_affine=0)[0]
        scale = max(np.abs(E_cols[0]).max(), 1.0)
        for col in row:
            assert np.abs(col).max() < 1e-14 * scale

    def test_degenerate_identical_rays(self, scene):
        _, acs, _ = gt_setup(scene)
        with pytest.raises(DegenerateInput):
            build_constraint_matrix(scene.rig, [acs[0], acs[0]], anchor=0)

    def test_entries_quadratic(self, scene):
        _, acs, _ = gt_setup(scene)
        F = build_constraint_matrix(scene.rig, acs, anchor=0, dof=6)
        assert F.max_degree == 2
        assert F.entry_degrees().max() <= 2

    def test_residual_row_consistency(self, scene):
        # rows of F at (q, lambda) match ac_residuals at E(lambda), up to
        # the cleared Cayley denominator (1 + |q|^2)
        recs, acs, q_gt = gt_setup(scene)
        rng = np.random.default_rng(5)
        for anchor in (0, 1):
            F = build_constraint_matrix(scene.rig, acs, anchor=anchor, dof=6)
            other = acs[1 - anchor]
            q = rng.normal(size=3) * 0.3
            lam1, lam2 = rng.uniform(5, 20, size=2)
            from rigpose.geometry import cayley_to_rotation

            R = cayley_to_rotation(q)
            denom = 1.0 + q @ q
            rows = F.evaluate(q) @ np.array([lam1, lam2, 1.0]) / denom

            anchor_ac = acs[anchor]
            triple_anchor = essential_in_depths(scene.rig, anchor_ac, R)
            res_anchor = ac_residuals(triple_anchor.at(lam1, lam2), anchor_ac)
            # other AC's constraints use the anchor's lines for the depths
            l1 = plucker_line(scene.rig, anchor_ac.cam_view1, anchor_ac.x)
            l2 = plucker_line(scene.rig, anchor_ac.cam_view2, anchor_ac.x_prime)
            from rigpose.constraints import _essential_triple

            triple_other = _essential_triple(
                scene.rig, other.cam_view1, other.cam_view2, R, l1, l2
            )
            res_other = ac_residuals(triple_other.at(lam1, lam2), other)
            expected = np.array([res_anchor[1], res_anchor[2], res_other[0], res_other[1], res_other[2]])
            scale = max(np.abs(expected).max(), 1.0)
            assert np.abs(rows - expected).max() < 1e-10 * scale


class TestEquationSystem:
    def test_counts(self, scene):
        _, acs, _ = gt_setup(scene)
        assert len(build_equation_system(scene.rig, acs, dof=6, use_extra=False)) == 20
        assert len(build_equation_system(scene.rig, acs, dof=6, use_extra=True)) == 26
        assert len(build_equation_system(scene.rig, acs, dof=5, use_extra=True, theta=0.3)) == 12
        assert len(build_equation_system(scene.rig, acs, dof=5, use_extra=False, theta=0.3)) == 9

    def test_degree_bounds(self, scene):
        _, acs, _ = gt_setup(scene)
        system = build_equation_system(scene.rig, acs, dof=6, use_extra=True)
        for p in system[:20]:
            assert p.degree() <= 6
        for p in system[20:]:
            assert p.degree() <= 4

    @pytest.mark.parametrize("mode", ["inter", "intra"])
    def test_vanishes_at_gt(self, scene, mode):
        _, acs, q_gt = gt_setup(scene, mode)
        theta = rotation_angle(scene.gt_pose.rotation)
        for dof, extra in [(6, False), (6, True), (5, False), (5, True)]:
            system = build_equation_system(
                scene.rig, acs, dof=dof, use_extra=extra, theta=theta if dof == 5 else None
            )
            for p in system:
                assert abs(p.evaluate(q_gt)) < 1e-8 * max(p.max_abs(), 1e-30)

    def test_missing_angle_prior(self, scene):
        _, acs, _ = gt_setup(scene)
        with pytest.raises(MissingAnglePrior):
            build_equation_system(scene.rig, acs, dof=5)


class TestTheorem1RankProperty:
    @pytest.mark.parametrize("mode", ["inter", "intra"])
    def test_top_block_rank_one_at_gt(self, scene, mode):
        recs, acs, q_gt = gt_setup(scene, mode)
        F = build_constraint_matrix(scene.rig, acs, anchor=0, dof=6)
        block = F.evaluate(q_gt)[:2]
        s = np.linalg.svd(block, compute_uv=False)
        assert s[1] < 1e-9 * s[0]

    def test_second_null_vector_form(self, scene):
        # the proof's construction: a null vector with zero third component,
        # built from the first two columns
        recs, acs, q_gt = gt_setup(scene)
        F = build_constraint_matrix(scene.rig, acs, anchor=0, dof=6)
        block = F.evaluate(q_gt)[:2]
        G = block[:, :2]
        _, _, Vt = np.linalg.svd(G)
        v2 = np.array([Vt[-1, 0], Vt[-1, 1], 0.0])
        assert v2[2] < 1e-9
        assert np.abs(block @ v2).max() < 1e-9 * np.abs(block).max()


class TestCorrespondenceIO:
    def test_pixel_roundtrip(self, scene, tmp_path):
        path = tmp_path / "acs.jsonl"
        records = []
        for i, rec in enumerate(scene.acs[:6]):
            records.append(
                (
                    0,
                    rec.ac.cam_view1,
                    rec.ac.cam_view2,
                    rec.x_px,
                    rec.xp_px,
                    rec.A_px,
                )
            )
        save_correspondences(path, records)
        loaded = load_correspondences(path, scene.rig)
        assert len(loaded) == 6
        for (fp, ac), rec in zip(loaded, scene.acs[:6]):
            assert fp == 0
            assert np.abs(ac.x - rec.ac.x).max() < 1e-12
            assert np.abs(ac.x_prime - rec.ac.x_prime).max() < 1e-12
            assert np.abs(ac.A - rec.ac.A).max() < 1e-10
            assert (ac.cam_view1, ac.cam_view2) == (rec.ac.cam_view1, rec.ac.cam_view2)

    def test_normalized_records(self, scene, tmp_path):
        path = tmp_path / "acs.jsonl"
        rec = scene.acs[0]
        with open(path, "w") as f:
            import json

            f.write(
                json.dumps(
                    {
                        "frame_pair": 3,
                        "cam1": rec.ac.cam_view1,
                        "cam2": rec.ac.cam_view2,
                        "x": [rec.ac.x[0], rec.ac.x[1]],
                        "xp": [rec.ac.x_prime[0], rec.ac.x_prime[1]],
                        "A": list(rec.ac.A.ravel()),
                        "space": "normalized",
                    }
                )
                + "\n"
            )
        (fp, ac), = load_correspondences(path, scene.rig)
        assert fp == 3
        assert np.abs(ac.A - rec.ac.A).max() < 1e-15

    def test_bad_space_rejected(self, scene, tmp_path):
        path = tmp_path / "acs.jsonl"
        path.write_text('{"frame_pair":0,"cam1":0,"cam2":1,"x":[0,0],"xp":[0,0],"A":[1,0,0,1],"space":"voxel"}\n')
        with pytest.raises(ValueError):
            load_correspondences(path, scene.rig)


def test_ac_type_validation():
    with pytest.raises(ValueError):
        AffineCorrespondence(np.array([0.1, 0.2, 1.1]), np.array([0.0, 0.0, 1.0]), np.eye(2), 0, 1)
    with pytest.raises(ValueError):
        AffineCorrespondence(
            np.array([0.1, 0.2, 1.0]), np.array([0.0, 0.0, 1.0]), np.zeros((2, 2)), 0, 1
        )
    ac = AffineCorrespondence(np.array([0.1, 0.2, 1.0]), np.array([0.0, 0.0, 1.0]), np.eye(2), 0, 1)
    assert ac.is_inter
    ac2 = AffineCorrespondence(np.array([0.1, 0.2, 1.0]), np.array([0.0, 0.0, 1.0]), np.eye(2), 1, 1)
    assert not ac2.is_inter
