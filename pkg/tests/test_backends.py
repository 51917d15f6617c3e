import numpy as np
import pytest

from rigpose import _kernels
from rigpose.constraints import build_equation_system
from rigpose.geometry import rotation_angle, rotation_to_cayley
from rigpose.polysolver import RootOptions, find_real_roots
from rigpose.synthbench import SceneConfig, generate_scene

needs_cython = pytest.mark.skipif(
    "cython" not in _kernels.available_backends(), reason="compiled kernel not built"
)


@pytest.fixture(scope="module")
def systems():
    out = []
    for seed in (101, 202):
        scene = generate_scene(SceneConfig(seed=seed, rot_range_deg=(5, 30)))
        theta = rotation_angle(scene.gt_pose.rotation)
        q_gt = rotation_to_cayley(scene.gt_pose.rotation)
        inter = scene.correspondences("inter")[:2]
        intra = scene.correspondences("intra")[:2]
        out.append((build_equation_system(scene.rig, inter, dof=6), None, q_gt))
        out.append((build_equation_system(scene.rig, intra, dof=6, use_extra=True), None, q_gt))
        out.append(
            (build_equation_system(scene.rig, inter, dof=5, use_extra=True, theta=theta), theta, q_gt)
        )
    return out


def match_roots(r1, r2, tol=1e-8):
    """Greedy one-to-one matching; returns the largest unmatched distance."""
    assert len(r1) == len(r2)
    used = set()
    worst = 0.0
    for a in r1:
        d = np.linalg.norm(r2 - a, axis=1)
        for j in np.argsort(d):
            if j not in used:
                used.add(j)
                worst = max(worst, d[j])
                break
    return worst


@needs_cython
def test_backends_agree_on_solver_systems(systems):
    for system, theta, q_gt in systems:
        opts_c = RootOptions(sphere_angle=theta, backend="cython")
        opts_n = RootOptions(sphere_angle=theta, backend="numpy")
        rc = find_real_roots(system, opts_c)
        rn = find_real_roots(system, opts_n)
        assert len(rc) == len(rn)
        assert match_roots(rc, rn) < 1e-8
        # both contain the ground truth
        assert np.linalg.norm(rc - q_gt, axis=1).min() < 1e-6
        assert np.linalg.norm(rn - q_gt, axis=1).min() < 1e-6


@needs_cython
def test_backend_selection():
    assert _kernels.get_backend("numpy").NAME == "numpy"
    assert _kernels.get_backend("python").NAME == "numpy"
    assert _kernels.get_backend("cython").NAME == "cython"
    assert _kernels.get_backend("auto").NAME in ("cython", "numpy")
    with pytest.raises(ValueError):
        _kernels.get_backend("fortran")


@needs_cython
def test_raw_kernel_parity():
    from rigpose.poly import exponents
    from rigpose.polysolver import _derivative_rows, _stack_system

    rng = np.random.default_rng(5)
    scene = generate_scene(SceneConfig(seed=303, rot_range_deg=(5, 30)))
    system = build_equation_system(scene.rig, scene.correspondences("inter")[:2], dof=6)
    C, deg = _stack_system(system)
    Cx, Cy, Cz = (_derivative_rows(C, deg, a) for a in range(3))
    seeds = np.ascontiguousarray(rng.normal(size=(40, 3)) * 0.3)
    args = (
        np.ascontiguousarray(C),
        np.ascontiguousarray(Cx),
        np.ascontiguousarray(Cy),
        np.ascontiguousarray(Cz),
        np.ascontiguousarray(exponents(deg)),
        np.ascontiguousarray(exponents(deg - 1)),
        seeds,
        50,
        20,
        1e-14,
    )
    pc, rc = _kernels.get_backend("cython").gauss_newton_roots(*args)
    pn, rn = _kernels.get_backend("numpy").gauss_newton_roots(*args)
    conv_c, conv_n = rc < 1e-10, rn < 1e-10
    assert np.array_equal(conv_c, conv_n)
    assert np.abs(pc[conv_c] - pn[conv_n]).max() < 1e-9
