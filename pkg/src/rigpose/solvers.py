"""Minimal relative-pose solvers for 2-AC samples and degeneracy flags."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .constraints import (
    ac_residuals,
    build_constraint_matrix,
    equation_subsystems,
)
from .exceptions import ModeMismatch, NoRootsFound, NormalizationFailure
from .geometry import (
    CameraRig,
    Pose,
    cayley_to_rotation,
    plucker_line,
    pose_essential,
    rig_relative_pose,
    rotation_angle,
)
from .polysolver import RootOptions, find_real_roots, normalized_residual

TAU_RANK = 1e-4


@dataclass(frozen=True)
class PoseCandidate:
    """One recovered motion hypothesis of a minimal sample."""

    pose: Pose
    cayley: np.ndarray
    depths: tuple  # anchor AC's view-1/view-2 depths, meters
    residual: float
    scale_degenerate: bool
    depth_positive: bool  # cheirality; infeasible candidates are kept, flagged
    alt_depths: tuple | None = None  # same point recovered from the swapped anchor


def _recover_from_matrix(F_num: np.ndarray, rig, acs, anchor: int, tau_rank: float, R: np.ndarray):
    anchor_ac = acs[anchor]
    line1 = plucker_line(rig, anchor_ac.cam_view1, anchor_ac.x)
    line2 = plucker_line(rig, anchor_ac.cam_view2, anchor_ac.x_prime)

    _, S, Vt = np.linalg.svd(F_num)
    scale_degenerate = bool(S[1] < tau_rank * S[0])
    if not scale_degenerate:
        v = Vt[2]
        if abs(v[2]) < 1e-9:
            raise NormalizationFailure("anchor point at infinity")
        lam1, lam2 = v[0] / v[2], v[1] / v[2]
        return lam1, lam2, line1.point_at(lam1), line2.point_at(lam2), False

    # >= 2-dim null space: the translation scale is free. Report the family
    # member with unit rig translation whose depths pass cheirality.
    c = np.array([Vt[1, 2], Vt[2, 2]])
    nc = np.linalg.norm(c)
    if nc < 1e-9:
        raise NormalizationFailure("anchor point at infinity (degenerate null space)")
    v0 = (c[0] * Vt[1] + c[1] * Vt[2]) / nc
    v0 = v0 / v0[2]
    w = Vt[2, 2] * Vt[1] - Vt[1, 2] * Vt[2]  # null direction with zero third entry
    wn = np.linalg.norm(w[:2])
    lam0 = v0[:2]
    lamdir = w[:2] / wn if wn > 1e-12 else np.zeros(2)

    def member(a):
        lam = lam0 + a * lamdir
        t1 = line1.point_at(lam[0])
        t2 = line2.point_at(lam[1])
        return lam, t1, t2, t2 - R @ t1

    # |t(a)| is quadratic in a; pick the unit-norm members if they exist
    T1 = lamdir[1] * line2.p - lamdir[0] * (R @ line1.p)
    T0 = member(0.0)[3]
    aa = T1 @ T1
    candidates = [0.0]
    if aa > 1e-18:
        bb, cc = 2.0 * (T0 @ T1), T0 @ T0 - 1.0
        disc = bb * bb - 4.0 * aa * cc
        if disc >= 0.0:
            candidates = [(-bb + np.sqrt(disc)) / (2 * aa), (-bb - np.sqrt(disc)) / (2 * aa)]

    def score(a):
        lam = lam0 + a * lamdir
        return (min(lam) > 0, min(lam), -abs(a))

    best_a = max(candidates, key=score)
    lam, t1, t2, _ = member(best_a)
    return lam[0], lam[1], t1, t2, True


def recover_depths_translation(rig: CameraRig, acs, anchor: int, q: np.ndarray, dof: int = 6, tau_rank: float = TAU_RANK):
    """Depths and anchor-frame translations at a rotation root.

    Takes the null vector of the anchor's constraint matrix, normalized to
    homogeneous form. scale_degenerate marks a >=2-dimensional null space,
    where only the translation direction is observable; the reported member
    of the solution family is then the best-conditioned one.
    """
    F = build_constraint_matrix(rig, acs, anchor=anchor, dof=dof)
    return _recover_from_matrix(F.evaluate(q), rig, acs, anchor, tau_rank, cayley_to_rotation(q))


def solve_relpose(
    rig: CameraRig,
    acs,
    mode: str,
    prior_angle: float | None = None,
    opts: RootOptions | None = None,
    use_extra: bool | None = None,
):
    """Relative rig poses consistent with a 2-AC minimal sample.

    mode is "inter" or "intra" and must match the pair. Passing prior_angle
    (radians) selects the fixed-rotation-angle 5DOF variant. Candidates are
    sorted by system residual; an empty list means no root converged.
    """
    if mode not in ("inter", "intra"):
        raise ValueError("mode must be 'inter' or 'intra'")
    want_inter = mode == "inter"
    for ac in acs:
        if ac.is_inter != want_inter:
            raise ModeMismatch(f"correspondence pair is not {mode}-camera")
    dof = 5 if prior_angle is not None else 6
    if use_extra is None:
        # intra needs the extra rank-1 equations (without them the base
        # 6DOF system has one-dimensional families of spurious roots); the
        # known-angle systems need them for conditioning near the roots
        use_extra = mode == "intra" or dof == 5
    systems, (F_a, F_b) = equation_subsystems(
        rig, acs, dof=dof, use_extra=use_extra, theta=prior_angle
    )
    if opts is None:
        opts = RootOptions()
    if dof == 5:
        opts = dataclasses.replace(opts, sphere_angle=prior_angle)

    found = []  # (q, residual under the generating subsystem)
    for system in systems:
        try:
            for q in find_real_roots(system, opts):
                found.append((q, float(np.linalg.norm(normalized_residual(system, q)))))
        except NoRootsFound:
            continue
    if not found:
        return []

    candidates = []
    seen = []
    for q, residual in found:
        if any(np.linalg.norm(q - p) < opts.tol_dup for p in seen):
            continue
        seen.append(q)
        R = cayley_to_rotation(q)
        try:
            lam1, lam2, t1, t2, degen = _recover_from_matrix(F_a.evaluate(q), rig, acs, 0, TAU_RANK, R)
        except NormalizationFailure:
            continue
        try:
            alt = _recover_from_matrix(F_b.evaluate(q), rig, acs, 1, TAU_RANK, R)[:2]
        except NormalizationFailure:
            alt = None
        pose = rig_relative_pose(R, t1, t2)
        candidates.append(
            PoseCandidate(
                pose=pose,
                cayley=q,
                depths=(lam1, lam2),
                residual=residual,
                scale_degenerate=degen,
                depth_positive=bool(lam1 > 0 and lam2 > 0),
                alt_depths=alt,
            )
        )
    candidates.sort(key=lambda c: c.residual)
    return candidates


@dataclass(frozen=True)
class DegeneracyReport:
    """Which critical motions hold, with the scale-family residual evidence."""

    inter_parallel_translation: bool
    intra_pure_translation: bool
    intra_constant_rotation: bool
    family_residuals: dict

    @property
    def any(self) -> bool:
        return self.inter_parallel_translation or self.intra_pure_translation or self.intra_constant_rotation


def _parallel(u: np.ndarray, v: np.ndarray, tol: float) -> bool:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu <= tol or nv <= tol:
        return True
    return np.linalg.norm(np.cross(u, v)) <= tol * nu * nv


def _family_residual(rig, R, t, acs, kappas=(0.5, 2.0)) -> float:
    worst = 0.0
    for kappa in kappas:
        pose = Pose(R, kappa * t)
        for ac in acs:
            E = pose_essential(rig, pose, ac.cam_view1, ac.cam_view2)
            E = E / np.linalg.norm(E)
            worst = max(worst, float(np.abs(ac_residuals(E, ac)).max()))
    return worst


def check_degenerate_motion(
    rig: CameraRig,
    pose: Pose,
    acs,
    rot_tol: float = 1e-6,
    par_tol: float = 1e-6,
) -> DegeneracyReport:
    """Detect the three critical motions where translation scale is lost.

    (a) inter pairs, no rotation, rig translation parallel to the camera
    baselines; (b) intra pairs, no rotation; (c) intra pairs, the
    rotation-induced camera displacement parallel to the rig translation.
    Each detected case is verified by checking that the correspondences
    stay consistent when the translation is rescaled.
    """
    R, t = pose.rotation, pose.translation
    no_rotation = rotation_angle(R) < rot_tol
    inter = [ac for ac in acs if ac.is_inter]
    intra = [ac for ac in acs if not ac.is_inter]

    case_a = bool(
        inter
        and no_rotation
        and all(
            _parallel(rig[ac.cam_view2].center - rig[ac.cam_view1].center, t, par_tol)
            for ac in inter
        )
    )
    case_b = bool(intra and no_rotation)
    case_c = bool(
        intra
        and not no_rotation
        and all(
            _parallel(R @ rig[ac.cam_view1].center - rig[ac.cam_view1].center, t, par_tol)
            for ac in intra
        )
    )

    residuals = {}
    if case_a:
        residuals["inter_parallel_translation"] = _family_residual(rig, R, t, inter)
    if case_b:
        residuals["intra_pure_translation"] = _family_residual(rig, R, t, intra)
    if case_c:
        residuals["intra_constant_rotation"] = _family_residual(rig, R, t, intra)
    return DegeneracyReport(case_a, case_b, case_c, residuals)
