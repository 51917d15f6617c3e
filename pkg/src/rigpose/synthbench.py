"""Synthetic two-camera benchmark: scenes, AC noising, conversions, metrics.

Scenes are piecewise-planar: half the correspondences come from a ground
plane, half from per-point random planes inside a fixed cube. Affine parts
are noised indirectly: map a pixel support square through the true
homography, perturb all point pairs, refit a homography to the four
corners, and take its Jacobian at the perturbed point.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .constraints import AffineCorrespondence
from .exceptions import DegenerateQuad, InvalidSpread, PointAtInfinity, ZeroTranslation
from .geometry import Camera, CameraRig, Pose, plucker_line, rotation_angle
from .robust import RansacConfig, ransac_estimate
from .exceptions import AllSamplesFailed, InsufficientCorrespondences


@dataclass(frozen=True)
class SceneConfig:
    baseline_m: float = 1.0
    motion_length_m: float = 3.0
    image_width: int = 640
    image_height: int = 480
    focal_px: float = 400.0
    principal_point: tuple = (320.0, 240.0)
    cube_min: tuple = (-5.0, -5.0, 10.0)
    cube_max: tuple = (5.0, 5.0, 20.0)
    n_ground_plane_acs: int = 50
    n_random_plane_acs: int = 50
    support_side_px: float = 40.0
    noise_sigma_px: float = 0.0
    motion_type: str = "random"  # forward | sideways | random
    rot_range_deg: tuple = (0.0, 30.0)
    seed: int = 0

    def __post_init__(self):
        if self.motion_type not in ("forward", "sideways", "random"):
            raise ValueError(f"unknown motion_type {self.motion_type!r}")
        if min(self.baseline_m, self.motion_length_m, self.focal_px, self.support_side_px) <= 0:
            raise ValueError("lengths and focal must be positive")
        if not all(a < b for a, b in zip(self.cube_min, self.cube_max)):
            raise ValueError("cube bounds must satisfy min < max per axis")


@dataclass(frozen=True)
class SceneAC:
    """Noise-free correspondence plus the ground truth that generated it."""

    ac: AffineCorrespondence
    x_px: np.ndarray
    xp_px: np.ndarray
    A_px: np.ndarray
    H_px: np.ndarray
    point: np.ndarray  # 3D point, view-1 rig frame
    depths: tuple  # ground-truth line depths in views 1 and 2
    plane: tuple  # (normal, offset): normal . X = offset


@dataclass(frozen=True)
class SyntheticScene:
    rig: CameraRig
    gt_pose: Pose  # view-1 -> view-2 point transform
    acs: tuple
    cfg: SceneConfig

    def indices(self, mode: str):
        want_inter = {"inter": True, "intra": False}[mode]
        return [i for i, rec in enumerate(self.acs) if rec.ac.is_inter == want_inter]

    def correspondences(self, mode: str):
        return [self.acs[i].ac for i in self.indices(mode)]

    def pixel_ac(self, index: int) -> AffineCorrespondence:
        """The correspondence in pixel units (for the PC-conversion protocol)."""
        rec = self.acs[index]
        return AffineCorrespondence(
            np.array([rec.x_px[0], rec.x_px[1], 1.0]),
            np.array([rec.xp_px[0], rec.xp_px[1], 1.0]),
            rec.A_px,
            rec.ac.cam_view1,
            rec.ac.cam_view2,
        )


def _intrinsics(cam: Camera) -> np.ndarray:
    return np.array([[cam.fx, 0.0, cam.cx], [0.0, cam.fy, cam.cy], [0.0, 0.0, 1.0]])


def _random_rotation(rng, angle_range_rad) -> np.ndarray:
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(*angle_range_rad)
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * (K @ K)


def affine_from_homography(H: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Jacobian of the homography map at homogeneous point x (2x2)."""
    H = np.asarray(H, dtype=float)
    x = np.asarray(x, dtype=float)
    w = H[2] @ x
    if abs(w) < 1e-12:
        raise PointAtInfinity("homography denominator vanishes at this point")
    u, v = (H[0] @ x) / w, (H[1] @ x) / w
    return np.array(
        [
            [H[0, 0] - H[2, 0] * u, H[0, 1] - H[2, 1] * u],
            [H[1, 0] - H[2, 0] * v, H[1, 1] - H[2, 1] * v],
        ]
    ) / w


def _plane_homography(rig, cam_a, cam_b, pose: Pose, normal, offset):
    """Normalized-coordinate homography camera a (view 1) -> camera b (view 2)."""
    Qa, sa = rig[cam_a].rotation, rig[cam_a].center
    Qb, sb = rig[cam_b].rotation, rig[cam_b].center
    d_a = offset - normal @ sa
    if abs(d_a) < 1e-9:
        return None
    Rp = Qb.T @ pose.rotation @ Qa
    tp = Qb.T @ (pose.rotation @ sa + pose.translation - sb)
    return Rp + np.outer(tp, Qa.T @ normal) / d_a


def _draw_motion(cfg: SceneConfig, rng) -> Pose:
    R_body = _random_rotation(rng, np.radians(cfg.rot_range_deg))
    direction = {
        "forward": np.array([0.0, 0.0, 1.0]),
        "sideways": np.array([1.0, 0.0, 0.0]),
        "random": None,
    }[cfg.motion_type]
    if direction is None:
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
    t_body = cfg.motion_length_m * direction
    # body motion -> view-1 to view-2 point transform
    return Pose(R_body.T, -R_body.T @ t_body)


def generate_scene(cfg: SceneConfig) -> SyntheticScene:
    """Two-camera scene with one inter and one intra routing per 3D point.

    Points outside any needed image are resampled; motions that leave too
    little covisible volume are redrawn entirely.
    """
    rng = np.random.default_rng(cfg.seed)
    f = cfg.focal_px
    cx, cy = cfg.principal_point
    half = cfg.baseline_m / 2.0
    rig = CameraRig(
        (
            Camera(f, f, cx, cy, np.eye(3), np.array([-half, 0.0, 0.0])),
            Camera(f, f, cx, cy, np.eye(3), np.array([half, 0.0, 0.0])),
        )
    )
    for _ in range(64):
        gt_pose = _draw_motion(cfg, rng)
        recs = _fill_scene(cfg, rng, rig, gt_pose)
        if recs is not None:
            return SyntheticScene(rig=rig, gt_pose=gt_pose, acs=tuple(recs), cfg=cfg)
    raise RuntimeError("no covisible scene found; check cube/motion configuration")


def scene_with_pose(cfg: SceneConfig, gt_pose: Pose) -> SyntheticScene:
    """Scene with a prescribed view-1 -> view-2 motion (degeneracy studies)."""
    rng = np.random.default_rng(cfg.seed)
    f = cfg.focal_px
    cx, cy = cfg.principal_point
    half = cfg.baseline_m / 2.0
    rig = CameraRig(
        (
            Camera(f, f, cx, cy, np.eye(3), np.array([-half, 0.0, 0.0])),
            Camera(f, f, cx, cy, np.eye(3), np.array([half, 0.0, 0.0])),
        )
    )
    recs = _fill_scene(cfg, rng, rig, gt_pose)
    if recs is None:
        raise RuntimeError("prescribed motion leaves too little covisible volume")
    return SyntheticScene(rig=rig, gt_pose=gt_pose, acs=tuple(recs), cfg=cfg)


def _fill_scene(cfg: SceneConfig, rng, rig: CameraRig, gt_pose: Pose):
    w, h = cfg.image_width, cfg.image_height
    lo = np.asarray(cfg.cube_min, dtype=float)
    hi = np.asarray(cfg.cube_max, dtype=float)

    def visible_mask(X):
        ok = np.ones(len(X), dtype=bool)
        for view in (1, 2):
            Xv = X if view == 1 else X @ gt_pose.rotation.T + gt_pose.translation
            for cam in rig.cameras:
                Xc = (Xv - cam.center) @ cam.rotation
                ok &= Xc[:, 2] > 0.2
                with np.errstate(divide="ignore", invalid="ignore"):
                    u = cam.fx * Xc[:, 0] / Xc[:, 2] + cam.cx
                    v = cam.fy * Xc[:, 1] / Xc[:, 2] + cam.cy
                ok &= (u >= 0.0) & (u <= w - 1) & (v >= 0.0) & (v <= h - 1)
        return ok

    def candidate_stream(on_ground: bool):
        """Visible (point, normal, offset) candidates, drawn in batches."""
        for _ in range(40):
            X = rng.uniform(lo, hi, size=(256, 3))
            if on_ground:
                X[:, 1] = hi[1]
                normals = np.tile([0.0, 1.0, 0.0], (256, 1))
                offsets = np.full(256, hi[1])
            else:
                normals = rng.normal(size=(256, 3))
                normals /= np.linalg.norm(normals, axis=1, keepdims=True)
                offsets = np.einsum("ij,ij->i", normals, X)
            for i in np.nonzero(visible_mask(X))[0]:
                yield X[i], normals[i], float(offsets[i])

    def build_record(X, normal, offset, cam_a, cam_b):
        Xc1 = rig[cam_a].rotation.T @ (X - rig[cam_a].center)
        X2 = gt_pose.apply(X)
        Xc2 = rig[cam_b].rotation.T @ (X2 - rig[cam_b].center)
        x = Xc1 / Xc1[2]
        xp = Xc2 / Xc2[2]
        H = _plane_homography(rig, cam_a, cam_b, gt_pose, normal, offset)
        if H is None:
            return None
        try:
            A = affine_from_homography(H, x)
        except PointAtInfinity:
            return None
        det = abs(np.linalg.det(A))
        if not np.isfinite(det) or det < 1e-8 or det > 1e8:
            return None
        Ka = _intrinsics(rig[cam_a])
        Kb = _intrinsics(rig[cam_b])
        H_px = Kb @ H @ np.linalg.inv(Ka)
        line1 = plucker_line(rig, cam_a, x)
        line2 = plucker_line(rig, cam_b, xp)
        return SceneAC(
            ac=AffineCorrespondence(x, xp, A, cam_a, cam_b),
            x_px=rig[cam_a].to_pixels(x),
            xp_px=rig[cam_b].to_pixels(xp),
            A_px=rig.affine_to_pixels(A, cam_a, cam_b),
            H_px=H_px,
            point=X,
            depths=(float(line1.p @ X), float(line2.p @ X2)),
            plane=(normal, offset),
        )

    recs = []
    counts = (cfg.n_ground_plane_acs, cfg.n_random_plane_acs)
    for on_ground, count in zip((True, False), counts):
        emitted = 0
        for X, normal, offset in candidate_stream(on_ground):
            cam = emitted % 2
            inter = build_record(X, normal, offset, cam, 1 - cam)
            intra = build_record(X, normal, offset, cam, cam)
            if inter is None or intra is None:
                continue
            recs.extend([inter, intra])
            emitted += 1
            if emitted == count:
                break
        if emitted < count:
            return None  # motion leaves too little covisible volume
    return recs


def _similarity_normalization(pts: np.ndarray) -> np.ndarray:
    mean = pts.mean(axis=0)
    rms = np.sqrt(((pts - mean) ** 2).sum(axis=1).mean())
    s = np.sqrt(2.0) / max(rms, 1e-12)
    return np.array([[s, 0.0, -s * mean[0]], [0.0, s, -s * mean[1]], [0.0, 0.0, 1.0]])


def _fit_homography_4pt(src: np.ndarray, dst: np.ndarray) -> np.ndarray | None:
    """Exact homography through 4 point pairs; None when (near-)degenerate.

    Coordinates are similarity-normalized first so the rank test is
    meaningful at pixel scale.
    """
    T1 = _similarity_normalization(src)
    T2 = _similarity_normalization(dst)
    sn = src @ T1[:2, :2].T + T1[:2, 2]
    dn = dst @ T2[:2, :2].T + T2[:2, 2]
    rows = []
    for (x, y), (u, v) in zip(sn, dn):
        rows.append([x, y, 1, 0, 0, 0, -u * x, -u * y, -u])
        rows.append([0, 0, 0, x, y, 1, -v * x, -v * y, -v])
    M = np.array(rows)
    _, S, Vt = np.linalg.svd(M)
    if S[7] < 1e-10 * S[0]:
        return None
    Hn = Vt[-1].reshape(3, 3)
    return np.linalg.inv(T2) @ Hn @ T1


def noisy_ac(scene: SyntheticScene, ac_index: int, sigma_px: float, support_side_px: float, rng) -> AffineCorrespondence:
    """Re-derive one AC under the four-corner pixel noising protocol."""
    rec = scene.acs[ac_index]
    rig = scene.rig
    half = support_side_px / 2.0
    corners1 = rec.x_px + np.array([[-half, -half], [half, -half], [half, half], [-half, half]])
    ones = np.ones((4, 1))
    mapped = (np.hstack([corners1, ones]) @ rec.H_px.T)
    corners2 = mapped[:, :2] / mapped[:, 2:3]

    for _ in range(32):
        n_pc1 = rng.normal(scale=1.0, size=2) * sigma_px
        n_pc2 = rng.normal(scale=1.0, size=2) * sigma_px
        n_c1 = rng.normal(scale=1.0, size=(4, 2)) * sigma_px
        n_c2 = rng.normal(scale=1.0, size=(4, 2)) * sigma_px
        src = corners1 + n_c1
        dst = corners2 + n_c2
        # collinearity guard: degenerate quads cannot fix a homography
        def cross2(u, v):
            return u[0] * v[1] - u[1] * v[0]

        area = abs(cross2(src[1] - src[0], src[2] - src[0])) + abs(
            cross2(src[2] - src[0], src[3] - src[0])
        )
        if area < 1e-6 * support_side_px**2:
            continue
        H = _fit_homography_4pt(src, dst)
        if H is None:
            continue
        x_px = rec.x_px + n_pc1
        xp_px = rec.xp_px + n_pc2
        try:
            A_px = affine_from_homography(H, np.array([x_px[0], x_px[1], 1.0]))
        except PointAtInfinity:
            continue
        if abs(np.linalg.det(A_px)) < 1e-12:
            continue
        cam_a, cam_b = rec.ac.cam_view1, rec.ac.cam_view2
        return AffineCorrespondence(
            rig[cam_a].normalize(x_px),
            rig[cam_b].normalize(xp_px),
            rig.affine_to_normalized(A_px, cam_a, cam_b),
            cam_a,
            cam_b,
        )
    raise DegenerateQuad("support corners stayed collinear after resampling")


def noisy_correspondences(scene: SyntheticScene, mode: str, sigma_px: float, support_side_px: float, rng):
    return [noisy_ac(scene, i, sigma_px, support_side_px, rng) for i in scene.indices(mode)]


def ac_to_three_pcs(ac: AffineCorrespondence, s: float):
    """Convert an AC to its point pair plus two hallucinated pairs.

    Offsets are applied in the AC's own coordinate units (the conversion
    protocol works in pixels). Returns three (view1_xy, view2_xy) pairs.
    """
    if s <= 0:
        raise InvalidSpread("spread must be positive")
    x, xp, A = ac.x[:2], ac.x_prime[:2], ac.A
    du = np.array([s, 0.0])
    dv = np.array([0.0, s])
    return (
        (x.copy(), xp.copy()),
        (x + du, xp + A @ du),
        (x + dv, xp + A @ dv),
    )


def pose_errors(gt: Pose, est: Pose):
    """(rotation error deg, translation error, translation direction error deg)."""
    c = np.clip((np.trace(gt.rotation @ est.rotation.T) - 1.0) / 2.0, -1.0, 1.0)
    eps_r = float(np.degrees(np.arccos(c)))
    n_gt = np.linalg.norm(gt.translation)
    n_est = np.linalg.norm(est.translation)
    if n_gt < 1e-12 or n_est < 1e-12:
        raise ZeroTranslation("translation direction undefined")
    eps_t = float(2.0 * np.linalg.norm(gt.translation - est.translation) / (n_gt + n_est))
    cd = np.clip(gt.translation @ est.translation / (n_gt * n_est), -1.0, 1.0)
    return eps_r, eps_t, float(np.degrees(np.arccos(cd)))


BENCH_COLUMNS = (
    "trial",
    "motion_type",
    "sigma_px",
    "support_px",
    "solver",
    "eps_R_deg",
    "eps_t",
    "eps_tdir_deg",
    "iterations",
    "wall_ms",
)

SOLVER_NAMES = ("2ac-inter", "2ac-intra", "2ac-ka-inter", "2ac-ka-intra")

def _fast_root_options():
    """Sweep profile: coarser seeding than the default; adequate once image
    noise dominates the error, and several times faster."""
    import math

    from .polysolver import RootOptions

    return RootOptions(
        seed_radii=tuple(math.tan(math.radians(a)) for a in (3.0, 8.0, 15.0, 25.0)),
        n_directions=34,
        sphere_seed_count=96,
        refine_deltas=(),
    )


def inlier_threshold(sigma_px: float, focal_px: float) -> float:
    """Sampson inlier threshold in normalized units, scaled with pixel noise."""
    return max(1e-4, 4.0 * sigma_px / focal_px)


def run_noise_sweep(
    sigmas,
    trials: int,
    solvers=("2ac-inter", "2ac-intra"),
    motion_type: str = "random",
    support_px: float = 40.0,
    master_seed: int = 0,
    hypotheses: int = 4,
    scene_cfg: SceneConfig | None = None,
    real_timing: bool = True,
    root_options=None,
):
    """Per-trial benchmark rows (dicts matching BENCH_COLUMNS).

    Every solver sees the same noisy correspondences of its mode in a given
    (trial, sigma) cell, and samples with the same seed, so paired
    comparisons (6DOF vs known-angle) run on identical data.
    """
    for name in solvers:
        if name not in SOLVER_NAMES:
            raise ValueError(f"unknown solver {name!r}")
    if root_options is None:
        root_options = _fast_root_options()
    base = scene_cfg if scene_cfg is not None else SceneConfig()
    rows = []
    for trial in range(trials):
        cfg = replace(base, motion_type=motion_type, support_side_px=support_px, seed=master_seed + trial)
        scene = generate_scene(cfg)
        theta = rotation_angle(scene.gt_pose.rotation)
        for sig_idx, sigma in enumerate(sigmas):
            noisy = {}
            for mode in ("inter", "intra"):
                if any(name.endswith(mode) for name in solvers):
                    rng = np.random.default_rng([master_seed + trial, sig_idx, {"inter": 0, "intra": 1}[mode]])
                    noisy[mode] = noisy_correspondences(scene, mode, sigma, support_px, rng)
            for name in solvers:
                mode = "inter" if name.endswith("inter") else "intra"
                prior = theta if "ka" in name else None
                rcfg = RansacConfig(
                    inlier_threshold=inlier_threshold(sigma, cfg.focal_px),
                    max_iterations=hypotheses,
                    adaptive=False,
                    seed=master_seed + trial,
                    root_options=root_options,
                )
                start = time.perf_counter()
                try:
                    result = ransac_estimate(scene.rig, noisy[mode], mode, prior, rcfg)
                    eps = pose_errors(scene.gt_pose, result.best.pose)
                    iters = result.iterations_run
                except (AllSamplesFailed, InsufficientCorrespondences, ZeroTranslation):
                    eps = (float("nan"),) * 3
                    iters = hypotheses
                wall = (time.perf_counter() - start) * 1e3 if real_timing else 0.0
                rows.append(
                    {
                        "trial": trial,
                        "motion_type": motion_type,
                        "sigma_px": sigma,
                        "support_px": support_px,
                        "solver": name,
                        "eps_R_deg": eps[0],
                        "eps_t": eps[1],
                        "eps_tdir_deg": eps[2],
                        "iterations": iters,
                        "wall_ms": wall,
                    }
                )
    return rows


def write_bench_csv(path, rows) -> None:
    import csv

    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=BENCH_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(row[k]) if isinstance(row[k], float) else row[k] for k in BENCH_COLUMNS})
