"""Per-correspondence epipolar/affine constraints and their polynomial form.

One affine correspondence contributes an epipolar residual and two affine
residuals. Fixing a world anchor at one correspondence's 3D point makes the
essential matrix of every camera pair linear in that anchor's two view
depths, with coefficients quadratic in the rotation parameters once the
rational rotation's denominator is cleared. Stacking the residual rows
gives the hidden-variable matrix whose rank deficiency the solvers exploit.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .exceptions import DegenerateInput, MissingAnglePrior
from .geometry import CameraRig, PluckerLine, plucker_line, skew
from .poly import PolyMatrix, TrivariatePoly, mul_coeffs, n_monomials


@dataclass(frozen=True)
class AffineCorrespondence:
    """Point match plus 2x2 local affine map, in normalized coordinates."""

    x: np.ndarray
    x_prime: np.ndarray
    A: np.ndarray
    cam_view1: int
    cam_view2: int

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        xp = np.asarray(self.x_prime, dtype=float)
        A = np.asarray(self.A, dtype=float)
        for v in (x, xp):
            if v.shape != (3,) or abs(v[2] - 1.0) > 1e-12:
                raise ValueError("points must be homogeneous with third component 1")
        if A.shape != (2, 2) or np.linalg.det(A) == 0.0:
            raise ValueError("affine part must be a nonsingular 2x2 matrix")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "x_prime", xp)
        object.__setattr__(self, "A", A)

    @property
    def is_inter(self) -> bool:
        return self.cam_view1 != self.cam_view2


@dataclass(frozen=True)
class DepthEssentialTriple:
    """Essential matrix as an affine function of the anchor's two depths."""

    E_const: np.ndarray
    E_lam1: np.ndarray
    E_lam2: np.ndarray

    def at(self, lam1: float, lam2: float) -> np.ndarray:
        return self.E_const + lam1 * self.E_lam1 + lam2 * self.E_lam2


def essential_in_depths(rig: CameraRig, ac: AffineCorrespondence, R: np.ndarray) -> DepthEssentialTriple:
    """Depth-linear essential matrix of an AC anchored at its own 3D point."""
    line1 = plucker_line(rig, ac.cam_view1, ac.x)
    line2 = plucker_line(rig, ac.cam_view2, ac.x_prime)
    return _essential_triple(rig, ac.cam_view1, ac.cam_view2, R, line1, line2)


def _essential_triple(rig, cam_a, cam_b, R, anchor_line1: PluckerLine, anchor_line2: PluckerLine):
    Qa, sa = rig[cam_a].rotation, rig[cam_a].center
    Qb, sb = rig[cam_b].rotation, rig[cam_b].center
    p1, p2 = anchor_line1.p, anchor_line2.p
    foot1 = np.cross(anchor_line1.m, p1)
    foot2 = np.cross(anchor_line2.m, p2)
    E_lam1 = -Qb.T @ R @ skew(p1) @ Qa
    E_lam2 = Qb.T @ skew(p2) @ R @ Qa
    E_const = Qb.T @ (R @ skew(sa - foot1) + skew(foot2 - sb) @ R) @ Qa
    return DepthEssentialTriple(E_const, E_lam1, E_lam2)


def ac_residuals(E: np.ndarray, ac: AffineCorrespondence) -> np.ndarray:
    """Epipolar and affine residuals of one AC under an essential matrix.

    Component 0 is x'^T E x; components 1-2 are (E^T x')_(1:2) + A^T (E x)_(1:2).
    All three vanish at a consistent (E, AC) pair.
    """
    Ex = E @ ac.x
    Etxp = E.T @ ac.x_prime
    affine = Etxp[:2] + ac.A.T @ Ex[:2]
    return np.array([ac.x_prime @ Ex, affine[0], affine[1]])


@lru_cache(maxsize=1)
def _cayley_tensor() -> np.ndarray:
    """(3, 3, 10) coefficients of the cleared-denominator rotation matrix."""
    x, y, z = (1, 0, 0), (0, 1, 0), (0, 0, 1)
    xx, yy, zz = (2, 0, 0), (0, 2, 0), (0, 0, 2)
    xy, xz, yz = (1, 1, 0), (1, 0, 1), (0, 1, 1)
    one = (0, 0, 0)
    entries = [
        [{one: 1, xx: 1, yy: -1, zz: -1}, {xy: 2, z: -2}, {y: 2, xz: 2}],
        [{xy: 2, z: 2}, {one: 1, xx: -1, yy: 1, zz: -1}, {yz: 2, x: -2}],
        [{xz: 2, y: -2}, {x: 2, yz: 2}, {one: 1, xx: -1, yy: -1, zz: 1}],
    ]
    out = np.zeros((3, 3, n_monomials(2)))
    for i in range(3):
        for j in range(3):
            out[i, j] = TrivariatePoly.from_terms(entries[i][j], 2).coeffs
    out.setflags(write=False)
    return out


def _symbolic_triple(rig, cam_a, cam_b, anchor_line1, anchor_line2):
    """Depth coefficients of the essential matrix with symbolic rotation.

    Returns three (3, 3, 10) tensors (constant, lambda1, lambda2 columns),
    quadratic in the rotation parameters.
    """
    C = _cayley_tensor()
    Qa, sa = rig[cam_a].rotation, rig[cam_a].center
    Qb, sb = rig[cam_b].rotation, rig[cam_b].center
    p1, p2 = anchor_line1.p, anchor_line2.p
    foot1 = np.cross(anchor_line1.m, p1)
    foot2 = np.cross(anchor_line2.m, p2)

    def sandwich(left, right):
        return np.einsum("ik,klm,lj->ijm", left, C, right)

    E_lam1 = -sandwich(Qb.T, skew(p1) @ Qa)
    E_lam2 = sandwich(Qb.T @ skew(p2), Qa)
    E_const = sandwich(Qb.T, skew(sa - foot1) @ Qa) + sandwich(Qb.T @ skew(foot2 - sb), Qa)
    return E_const, E_lam1, E_lam2


def _constraint_rows(E_cols, ac: AffineCorrespondence, include_epipolar: bool, n_affine: int):
    """Residual rows of one AC, as (rows, 3 depth-columns, 10) coefficients."""
    E_const, E_lam1, E_lam2 = E_cols
    rows = []
    cols_order = (E_lam1, E_lam2, E_const)  # multiplies (lam1, lam2, 1)
    if include_epipolar:
        rows.append([np.einsum("i,ijm,j->m", ac.x_prime, E, ac.x) for E in cols_order])
    affine = []
    for E in cols_order:
        Etxp = np.einsum("jim,j->im", E, ac.x_prime)[:2]
        Ex = np.einsum("ijm,j->im", E, ac.x)[:2]
        affine.append(Etxp + ac.A.T @ Ex)
    for r in range(n_affine):
        rows.append([affine[k][r] for k in range(3)])
    return rows


def build_constraint_matrix(rig: CameraRig, acs, anchor: int, dof: int = 6) -> PolyMatrix:
    """Hidden-variable matrix F with F(q) @ (lam1, lam2, 1) = 0 at a solution.

    Rows: the anchor AC's two affine residuals, then the other AC's epipolar
    residual and its affine residuals (both for dof=6, the first only for
    dof=5). The anchor's own epipolar row is excluded: its coefficients
    vanish identically. Entries are quadratic in the rotation parameters.
    """
    if dof not in (6, 5):
        raise ValueError("dof must be 6 or 5")
    if len(acs) != 2:
        raise ValueError("exactly two correspondences required")
    anchor_ac, other_ac = acs[anchor], acs[1 - anchor]

    a_l1 = plucker_line(rig, anchor_ac.cam_view1, anchor_ac.x)
    a_l2 = plucker_line(rig, anchor_ac.cam_view2, anchor_ac.x_prime)
    o_l1 = plucker_line(rig, other_ac.cam_view1, other_ac.x)
    o_l2 = plucker_line(rig, other_ac.cam_view2, other_ac.x_prime)
    if (
        np.allclose(a_l1.p, o_l1.p, atol=1e-9)
        and np.allclose(a_l1.m, o_l1.m, atol=1e-9)
        and np.allclose(a_l2.p, o_l2.p, atol=1e-9)
        and np.allclose(a_l2.m, o_l2.m, atol=1e-9)
    ):
        raise DegenerateInput("correspondences share identical rays in both views")

    E_anchor = _symbolic_triple(rig, anchor_ac.cam_view1, anchor_ac.cam_view2, a_l1, a_l2)
    E_other = _symbolic_triple(rig, other_ac.cam_view1, other_ac.cam_view2, a_l1, a_l2)

    rows = _constraint_rows(E_anchor, anchor_ac, include_epipolar=False, n_affine=2)
    rows += _constraint_rows(E_other, other_ac, include_epipolar=True, n_affine=2 if dof == 6 else 1)
    return PolyMatrix(np.array(rows), 2)


NUMERIC_ZERO_DET = 1e-10


def _zero_clamped(coeffs: np.ndarray, hadamard_scale: float, degree: int) -> TrivariatePoly:
    """A determinant whose coefficients are pure cancellation noise relative
    to the row scales is the zero polynomial (degenerate configurations, e.g.
    both ACs through one ordered camera pair, produce these)."""
    if np.abs(coeffs).max() < NUMERIC_ZERO_DET * hadamard_scale:
        coeffs = np.zeros_like(coeffs)
    return TrivariatePoly(coeffs, degree)


def _three_by_three_dets(F: PolyMatrix):
    """All 3x3 row-subdeterminants of an (n x 3) quadratic matrix, degree <= 6."""
    T = F.tensor
    n = T.shape[0]
    row_scale = np.abs(T).max(axis=(1, 2))
    c1, c2 = np.array([1, 0, 0]), np.array([2, 2, 1])  # minors for cols (1,2),(0,2),(0,1)
    minors = {}
    for i, j in itertools.combinations(range(n), 2):
        minors[i, j] = mul_coeffs(T[i, c1], 2, T[j, c2], 2) - mul_coeffs(T[i, c2], 2, T[j, c1], 2)
    signs = np.array([1.0, -1.0, 1.0])
    out = []
    for i, j, k in itertools.combinations(range(n), 3):
        terms = mul_coeffs(T[k], 2, minors[i, j], 4)
        out.append(_zero_clamped(signs @ terms, row_scale[i] * row_scale[j] * row_scale[k], 6))
    return out


def _top_block_dets(F: PolyMatrix):
    """2x2 subdeterminants of the top 2x3 block, degree <= 4."""
    T = F.tensor
    row_scale = np.abs(T).max(axis=(1, 2))
    out = []
    for c1, c2 in itertools.combinations(range(3), 2):
        coeffs = mul_coeffs(T[0, c1], 2, T[1, c2], 2) - mul_coeffs(T[0, c2], 2, T[1, c1], 2)
        out.append(_zero_clamped(coeffs, row_scale[0] * row_scale[1], 4))
    return out


def sphere_constraint(theta: float) -> TrivariatePoly:
    """q_x^2 + q_y^2 + q_z^2 - tan^2(theta/2); fixes the rotation angle."""
    t2 = np.tan(theta / 2.0) ** 2
    return TrivariatePoly.from_terms({(2, 0, 0): 1.0, (0, 2, 0): 1.0, (0, 0, 2): 1.0, (0, 0, 0): -t2}, 2)


def equation_system_and_matrices(
    rig: CameraRig,
    acs,
    dof: int = 6,
    use_extra: bool = False,
    theta: float | None = None,
):
    """build_equation_system plus the full 5-row anchor matrices.

    The returned matrices are always 5x3 (the dof=5 system only uses their
    top four rows); their null space at a root gives the depths with better
    conditioning than the truncated matrix.
    """
    if dof == 5 and theta is None:
        raise MissingAnglePrior("dof=5 requires the relative rotation angle")
    F_a = build_constraint_matrix(rig, acs, anchor=0, dof=6)
    F_b = build_constraint_matrix(rig, acs, anchor=1, dof=6)
    if dof == 5:
        rows = [0, 1, 2, 3]
        Fa_sys = F_a.submatrix(rows, [0, 1, 2])
        Fb_sys = F_b.submatrix(rows, [0, 1, 2])
    else:
        Fa_sys, Fb_sys = F_a, F_b
    system = _three_by_three_dets(Fa_sys) + _three_by_three_dets(Fb_sys)
    if dof == 5:
        system.append(sphere_constraint(theta))
        if use_extra:
            system += _top_block_dets(Fa_sys)
    elif use_extra:
        system += _top_block_dets(Fa_sys) + _top_block_dets(Fb_sys)
    return system, (F_a, F_b)


def build_equation_system(
    rig: CameraRig,
    acs,
    dof: int = 6,
    use_extra: bool = False,
    theta: float | None = None,
):
    """Polynomial system in the rotation parameters for a 2-AC minimal sample.

    dof=6: 20 rank constraints (degree <= 6), plus 6 degree-<=4 extras from
    the rank-1 property of the affine blocks when use_extra is set.
    dof=5: 8 rank constraints, the rotation-angle sphere, plus the first
    anchor's 3 extras when use_extra is set. Requires theta (radians).
    """
    return equation_system_and_matrices(rig, acs, dof, use_extra, theta)[0]


def equation_subsystems(
    rig: CameraRig,
    acs,
    dof: int = 6,
    use_extra: bool = False,
    theta: float | None = None,
):
    """Exactly-solvable root-finding targets plus the full anchor matrices.

    For dof=6 this is the one joint system: the minimal problem is exactly
    determined, so both anchors' determinants share their roots even on
    noisy input. For dof=5 the problem is overdetermined once the angle is
    fixed; each anchor's determinant set + sphere (+ its extras) is a
    separate minimal problem, and only those have exact roots under noise.
    """
    if dof == 5 and theta is None:
        raise MissingAnglePrior("dof=5 requires the relative rotation angle")
    F_a = build_constraint_matrix(rig, acs, anchor=0, dof=6)
    F_b = build_constraint_matrix(rig, acs, anchor=1, dof=6)
    if dof == 6:
        system = _three_by_three_dets(F_a) + _three_by_three_dets(F_b)
        if use_extra:
            system += _top_block_dets(F_a) + _top_block_dets(F_b)
        return [system], (F_a, F_b)
    rows = [0, 1, 2, 3]
    systems = []
    for F in (F_a, F_b):
        F_sys = F.submatrix(rows, [0, 1, 2])
        system = _three_by_three_dets(F_sys)
        system.append(sphere_constraint(theta))
        if use_extra:
            system += _top_block_dets(F_sys)
        systems.append(system)
    return systems, (F_a, F_b)


def load_correspondences(path, rig: CameraRig):
    """Read a JSON-lines correspondence file; returns [(frame_pair, AC), ...].

    Pixel-space records are converted to normalized coordinates with the
    rig's intrinsics.
    """
    out = []
    with open(path) as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            try:
                cam1, cam2 = int(rec["cam1"]), int(rec["cam2"])
                x, xp = rec["x"], rec["xp"]
                A = np.array(rec["A"], dtype=float).reshape(2, 2)
                space = rec["space"]
            except (KeyError, ValueError) as e:
                raise ValueError(f"{path}:{line_no}: bad correspondence record: {e}") from e
            if space == "pixel":
                x = rig[cam1].normalize(x)
                xp = rig[cam2].normalize(xp)
                A = rig.affine_to_normalized(A, cam1, cam2)
            elif space == "normalized":
                x = np.array([x[0], x[1], 1.0])
                xp = np.array([xp[0], xp[1], 1.0])
            else:
                raise ValueError(f"{path}:{line_no}: unknown space {space!r}")
            out.append((rec.get("frame_pair", 0), AffineCorrespondence(x, xp, A, cam1, cam2)))
    return out


def save_correspondences(path, records) -> None:
    """Write [(frame_pair, cam1, cam2, x_px, xp_px, A_px)] as pixel-space JSONL."""
    with open(path, "w") as f:
        for frame_pair, cam1, cam2, x, xp, A in records:
            rec = {
                "frame_pair": int(frame_pair),
                "cam1": int(cam1),
                "cam2": int(cam2),
                "x": [float(x[0]), float(x[1])],
                "xp": [float(xp[0]), float(xp[1])],
                "A": [float(A[0, 0]), float(A[0, 1]), float(A[1, 0]), float(A[1, 1])],
                "space": "pixel",
            }
            f.write(json.dumps(rec, sort_keys=True) + "\n")
