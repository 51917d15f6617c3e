"""Command-line interface: synth, solve, ransac, bench, traj, iters."""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import fields, replace

import numpy as np

from .constraints import load_correspondences, save_correspondences
from .exceptions import AllSamplesFailed, InsufficientCorrespondences, RigposeError
from .geometry import Pose, load_rig, quat_to_rotation, rotation_to_quat, save_rig
from .robust import RansacConfig, ransac_estimate, ransac_iterations
from .synthbench import (
    SceneConfig,
    generate_scene,
    noisy_correspondences,
    pose_errors,
    run_noise_sweep,
    write_bench_csv,
)


def _write_trajectory(path, poses) -> None:
    """Absolute rig poses, one line per frame: t tx ty tz qw qx qy qz."""
    with open(path, "w") as f:
        for k, pose in enumerate(poses):
            q = [float(v) for v in rotation_to_quat(pose.rotation)]
            t = [float(v) for v in pose.translation]
            f.write(
                f"{float(k)!r} {t[0]!r} {t[1]!r} {t[2]!r} {q[0]!r} {q[1]!r} {q[2]!r} {q[3]!r}\n"
            )


def _read_trajectory(path):
    poses = []
    with open(path) as f:
        for line in f:
            parts = line.split()
            if not parts:
                continue
            vals = [float(v) for v in parts]
            if len(vals) != 8:
                raise ValueError(f"{path}: expected 8 fields per line, got {len(vals)}")
            poses.append(Pose(quat_to_rotation(vals[4:8]), np.array(vals[1:4])))
    return poses


def _accumulate(relative_poses):
    """Absolute camera-to-world poses from view-k -> view-(k+1) transforms."""
    absolute = [Pose(np.eye(3), np.zeros(3))]
    for rel in relative_poses:
        absolute.append(absolute[-1].compose(rel.inverse()))
    return absolute


def _relative_from_absolute(absolute, k):
    """View-k -> view-(k+1) point transform between two absolute poses."""
    return absolute[k + 1].inverse().compose(absolute[k])


def _pose_record(pose: Pose):
    q = rotation_to_quat(pose.rotation)
    return {"q_wxyz": q.tolist(), "t_xyz": pose.translation.tolist()}


def _cmd_iters(args) -> int:
    print(ransac_iterations(args.p, args.eps, args.s))
    return 0


def _cmd_synth(args) -> int:
    cfg = SceneConfig()
    if args.config:
        with open(args.config) as f:
            doc = json.load(f)
        known = {f.name for f in fields(SceneConfig)}
        bad = set(doc) - known
        if bad:
            raise ValueError(f"unknown scene-config keys: {sorted(bad)}")
        cfg = SceneConfig(**doc)
    if args.sigma is not None:
        cfg = replace(cfg, noise_sigma_px=args.sigma)
    if args.support is not None:
        cfg = replace(cfg, support_side_px=args.support)
    if args.motion is not None:
        cfg = replace(cfg, motion_type=args.motion)

    records = []
    relatives = []
    rig = None
    for trial in range(args.trials):
        scene = generate_scene(replace(cfg, seed=args.seed + trial))
        rig = scene.rig
        relatives.append(scene.gt_pose)
        for mode_idx, mode in enumerate(("inter", "intra")):
            rng = np.random.default_rng([args.seed + trial, mode_idx])
            acs = noisy_correspondences(scene, mode, cfg.noise_sigma_px, cfg.support_side_px, rng)
            for ac in acs:
                cam_a, cam_b = ac.cam_view1, ac.cam_view2
                records.append(
                    (
                        trial,
                        cam_a,
                        cam_b,
                        rig[cam_a].to_pixels(ac.x),
                        rig[cam_b].to_pixels(ac.x_prime),
                        rig.affine_to_pixels(ac.A, cam_a, cam_b),
                    )
                )
    save_rig(rig, f"{args.out}/rig.json")
    save_correspondences(f"{args.out}/acs.jsonl", records)
    _write_trajectory(f"{args.out}/gt.txt", _accumulate(relatives))
    print(f"wrote rig.json, acs.jsonl, gt.txt to {args.out}")
    return 0


def _candidate_record(cand):
    return {
        "pose": _pose_record(cand.pose),
        "cayley": cand.cayley.tolist(),
        "depths": list(cand.depths),
        "residual": cand.residual,
        "scale_degenerate": cand.scale_degenerate,
        "depth_positive": cand.depth_positive,
    }


def _cmd_solve(args) -> int:
    from .solvers import solve_relpose

    rig = load_rig(args.rig)
    recs = load_correspondences(args.acs, rig)
    want_inter = args.mode == "inter"
    acs = [ac for _, ac in recs if ac.is_inter == want_inter][:2]
    if len(acs) < 2:
        raise InsufficientCorrespondences(f"correspondence file has < 2 {args.mode} records")
    prior = math.radians(args.angle_prior) if args.angle_prior is not None else None
    candidates = solve_relpose(rig, acs, args.mode, prior)
    print(json.dumps({"candidates": [_candidate_record(c) for c in candidates]}, sort_keys=True))
    return 0 if candidates else 1


def _cmd_ransac(args) -> int:
    rig = load_rig(args.rig)
    recs = load_correspondences(args.acs, rig)
    groups = {}
    for frame_pair, ac in recs:
        groups.setdefault(int(frame_pair), []).append(ac)
    gt_abs = _read_trajectory(args.gt) if args.gt else None
    prior = math.radians(args.angle_prior) if args.angle_prior is not None else None

    estimates = []
    with open(args.out, "w") as f:
        for frame_pair in sorted(groups):
            cfg = RansacConfig(
                inlier_threshold=args.tau,
                max_iterations=args.max_iters,
                seed=args.seed + frame_pair,
            )
            rec = {"frame_pair": frame_pair}
            try:
                result = ransac_estimate(rig, groups[frame_pair], args.mode, prior, cfg)
            except (AllSamplesFailed, InsufficientCorrespondences) as e:
                rec["error"] = str(e)
                f.write(json.dumps(rec, sort_keys=True) + "\n")
                continue
            estimates.append((frame_pair, result.best.pose))
            rec.update(_pose_record(result.best.pose))
            rec["inliers"] = result.inlier_count
            rec["iterations"] = result.iterations_run
            if gt_abs is not None and frame_pair + 1 < len(gt_abs):
                gt_rel = _relative_from_absolute(gt_abs, frame_pair)
                eps = pose_errors(gt_rel, result.best.pose)
                rec["eps_R_deg"], rec["eps_t"], rec["eps_tdir_deg"] = eps
            f.write(json.dumps(rec, sort_keys=True) + "\n")
    print(f"estimated {len(estimates)}/{len(groups)} frame pairs -> {args.out}")
    return 0


def _cmd_bench(args) -> int:
    sigmas = [float(s) for s in args.sigmas.split(",")]
    solvers = tuple(args.solvers.split(","))
    rows = run_noise_sweep(
        sigmas,
        trials=args.trials,
        solvers=solvers,
        motion_type=args.motion,
        support_px=args.support,
        master_seed=args.seed,
        hypotheses=args.hypotheses,
        real_timing=args.timing == "real",
    )
    write_bench_csv(args.out, rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_traj(args) -> int:
    relatives = []
    with open(args.input) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if "q_wxyz" not in rec:
                continue
            relatives.append(Pose(quat_to_rotation(rec["q_wxyz"]), np.array(rec["t_xyz"])))
    _write_trajectory(args.out, _accumulate(relatives))
    print(f"wrote trajectory of {len(relatives) + 1} frames to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rigpose", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("iters", help="RANSAC iteration count for (p, eps, s)")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--s", type=int, required=True)
    p.set_defaults(func=_cmd_iters)

    p = sub.add_parser("synth", help="generate rig/correspondence/ground-truth files")
    p.add_argument("--config", help="SceneConfig JSON file")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma", type=float, help="pixel noise std (overrides config)")
    p.add_argument("--support", type=float, help="support square side, px")
    p.add_argument("--motion", choices=["forward", "sideways", "random"])
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("solve", help="one minimal solve on a 2-AC file")
    p.add_argument("--rig", required=True)
    p.add_argument("--acs", required=True)
    p.add_argument("--mode", choices=["inter", "intra"], required=True)
    p.add_argument("--angle-prior", type=float, help="rotation angle prior, degrees")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("ransac", help="robust estimation per frame pair")
    p.add_argument("--rig", required=True)
    p.add_argument("--acs", required=True)
    p.add_argument("--mode", choices=["inter", "intra"], required=True)
    p.add_argument("--angle-prior", type=float, help="rotation angle prior, degrees")
    p.add_argument("--gt", help="ground-truth trajectory file")
    p.add_argument("--tau", type=float, default=1e-4, help="Sampson inlier threshold")
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ransac)

    p = sub.add_parser("bench", help="noise sweep, CSV output")
    p.add_argument("--sigmas", default="0,0.25,0.5,0.75,1.0")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--support", type=float, default=40.0)
    p.add_argument("--motion", choices=["forward", "sideways", "random"], default="random")
    p.add_argument("--solvers", default="2ac-inter,2ac-intra")
    p.add_argument("--hypotheses", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timing", choices=["real", "fixed"], default="real",
                   help="fixed writes wall_ms=0.0 for byte-stable output")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("traj", help="concatenate relative poses into a trajectory")
    p.add_argument("--in", dest="input", required=True, help="ransac output JSONL")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_traj)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (RigposeError, OSError, ValueError, json.JSONDecodeError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
