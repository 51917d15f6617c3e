"""RANSAC over affine correspondences with adaptive iteration bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import AllSamplesFailed, DegenerateInput, InsufficientCorrespondences
from .geometry import CameraRig, Pose, pose_essential
from .polysolver import RootOptions
from .solvers import PoseCandidate, solve_relpose

SAMPLE_SIZE = 2


@dataclass(frozen=True)
class RansacConfig:
    success_prob: float = 0.999
    inlier_threshold: float = 1e-4  # Sampson distance, normalized units
    max_iterations: int = 1000
    seed: int = 0
    adaptive: bool = True
    root_options: RootOptions | None = None

    def __post_init__(self):
        if not 0.0 < self.success_prob < 1.0:
            raise ValueError("success_prob must be in (0, 1)")
        if self.inlier_threshold <= 0.0:
            raise ValueError("inlier_threshold must be positive")


@dataclass(frozen=True)
class RansacResult:
    best: PoseCandidate
    inlier_mask: np.ndarray
    iterations_run: int
    inlier_count: int


def ransac_iterations(p: float, eps: float, s: int) -> int:
    """Iterations needed for an all-inlier sample with probability p.

    eps is the outlier ratio and s the sample size; ceil(log(1-p) /
    log(1 - (1-eps)^s)), with eps = 0 giving 1.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("p must be in (0, 1)")
    if not 0.0 <= eps < 1.0:
        raise ValueError("eps must be in [0, 1)")
    if s < 1:
        raise ValueError("s must be >= 1")
    w = (1.0 - eps) ** s
    if w >= 1.0:
        return 1
    return int(math.ceil(math.log(1.0 - p) / math.log(1.0 - w)))


def sampson_distance(E: np.ndarray, x: np.ndarray, xp: np.ndarray) -> float:
    """Squared first-order geometric distance to the epipolar constraint."""
    Ex = E @ x
    Etxp = E.T @ xp
    den = Ex[0] ** 2 + Ex[1] ** 2 + Etxp[0] ** 2 + Etxp[1] ** 2
    num = float(xp @ Ex) ** 2
    if den < 1e-300:
        return 0.0 if num == 0.0 else float("inf")
    return num / den


def score_model(rig: CameraRig, pose: Pose, acs, inlier_threshold: float):
    """Inlier mask and truncated (MSAC) cost of a pose over the ACs.

    Only the point pairs are scored; the affine parts are hypothesis-side
    information. The threshold is inclusive so tau 0 keeps exactly-zero
    residuals only.
    """
    tau2 = inlier_threshold * inlier_threshold
    mask = np.zeros(len(acs), dtype=bool)
    cost = 0.0
    cache = {}
    for i, ac in enumerate(acs):
        key = (ac.cam_view1, ac.cam_view2)
        if key not in cache:
            cache[key] = pose_essential(rig, pose, *key)
        d = sampson_distance(cache[key], ac.x, ac.x_prime)
        mask[i] = math.sqrt(d) <= inlier_threshold
        cost += min(d, tau2)
    return mask, cost


def ransac_estimate(
    rig: CameraRig,
    acs,
    mode: str,
    prior_angle: float | None = None,
    cfg: RansacConfig = RansacConfig(),
) -> RansacResult:
    """Robust 2-AC relative pose over a correspondence set.

    Deterministic given cfg.seed. The best model maximizes the inlier
    count, with the truncated Sampson cost breaking ties.
    """
    want_inter = {"inter": True, "intra": False}[mode]
    pool = [i for i, ac in enumerate(acs) if ac.is_inter == want_inter]
    if len(pool) < SAMPLE_SIZE:
        raise InsufficientCorrespondences(f"need >= {SAMPLE_SIZE} {mode} correspondences, have {len(pool)}")
    scored = [acs[i] for i in pool]

    rng = np.random.default_rng(cfg.seed)
    bound = cfg.max_iterations
    best = None
    best_count = -1
    best_cost = float("inf")
    best_mask = None
    it = 0
    while it < bound:
        it += 1
        i, j = rng.choice(len(pool), size=SAMPLE_SIZE, replace=False)
        sample = [scored[i], scored[j]]
        try:
            candidates = solve_relpose(
                rig, sample, mode, prior_angle, opts=cfg.root_options
            )
        except DegenerateInput:
            continue
        for cand in candidates:
            mask, cost = score_model(rig, cand.pose, scored, cfg.inlier_threshold)
            count = int(mask.sum())
            if count > best_count or (count == best_count and cost < best_cost):
                best, best_count, best_cost, best_mask = cand, count, cost, mask
                if cfg.adaptive and count > 0:
                    eps_hat = 1.0 - count / len(pool)
                    bound = min(bound, ransac_iterations(cfg.success_prob, eps_hat, SAMPLE_SIZE))
    if best is None:
        raise AllSamplesFailed("no sample produced a pose candidate")

    full_mask = np.zeros(len(acs), dtype=bool)
    for k, idx in enumerate(pool):
        full_mask[idx] = best_mask[k]
    return RansacResult(best=best, inlier_mask=full_mask, iterations_run=it, inlier_count=best_count)
