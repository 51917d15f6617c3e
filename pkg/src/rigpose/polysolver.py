"""Real-root extraction for the trivariate constraint systems.

Multi-start damped Gauss-Newton over a fixed seed grid replaces the
elimination-template machinery the systems were originally solved with;
only the geometrically meaningful real roots are needed downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .exceptions import NoRootsFound
from .poly import exponents, n_monomials, _diff_table


def lattice_directions() -> np.ndarray:
    """The 26 unit directions of the 3x3x3 sign lattice, in fixed order."""
    dirs = []
    for a in (-1, 0, 1):
        for b in (-1, 0, 1):
            for c in (-1, 0, 1):
                if (a, b, c) != (0, 0, 0):
                    v = np.array([a, b, c], dtype=float)
                    dirs.append(v / np.linalg.norm(v))
    return np.array(dirs)


def fibonacci_sphere(n: int) -> np.ndarray:
    """n near-uniform unit directions (deterministic spiral)."""
    i = np.arange(n, dtype=float)
    z = 1.0 - 2.0 * (i + 0.5) / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = i * math.pi * (3.0 - math.sqrt(5.0))
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


@dataclass(frozen=True)
class RootOptions:
    """Seed grid, iteration, and acceptance settings for find_real_roots.

    The defaults are tuned for the 2-AC systems with rotations up to ~60
    degrees; refine_deltas adds a second polishing wave seeded around the
    roots of the first wave, which recovers narrow basins that the static
    grid misses.
    """

    seed_radii: tuple = (
        math.tan(math.radians(3)),
        math.tan(math.radians(7)),
        math.tan(math.radians(12)),
        math.tan(math.radians(18)),
        math.tan(math.radians(30)),
    )
    n_directions: int = 89
    sphere_angle: float | None = None  # set for the fixed-rotation-angle solvers
    sphere_seed_count: int = 256
    newton_iters: int = 50
    tol_res: float = 1e-10
    tol_dup: float = 1e-6
    max_damping: int = 20
    max_roots: int = 64
    refine_deltas: tuple = (0.05,)
    backend: str = "auto"

    def seeds(self) -> np.ndarray:
        if self.sphere_angle is not None:
            radius = math.tan(self.sphere_angle / 2.0)
            return fibonacci_sphere(self.sphere_seed_count) * radius
        dirs = lattice_directions() if self.n_directions == 26 else fibonacci_sphere(self.n_directions)
        grid = [np.zeros((1, 3))]
        for radius in self.seed_radii:
            grid.append(dirs * radius)
        return np.vstack(grid)


def _stack_system(system):
    """Pad polys to a common degree and normalize rows by max-abs coefficient."""
    deg = max(p.max_degree for p in system)
    deg = max(deg, 1)
    C = np.zeros((len(system), n_monomials(deg)))
    for i, p in enumerate(system):
        C[i, : len(p.coeffs)] = p.coeffs
    scale = np.abs(C).max(axis=1)
    keep = scale > 0.0
    C = C[keep] / scale[keep, None]
    return C, deg


def _derivative_rows(C: np.ndarray, deg: int, axis: int) -> np.ndarray:
    src, dst, fac = _diff_table(deg, axis)
    out = np.zeros((C.shape[0], n_monomials(deg - 1)))
    np.add.at(out, (slice(None), dst), C[:, src] * fac)
    return out


def normalized_residual(system, q) -> np.ndarray:
    """Residual vector of the max-abs-normalized system at q."""
    C, deg = _stack_system(system)
    from .poly import monomial_basis

    return C @ monomial_basis(np.asarray(q, dtype=float), deg)[0]


def find_real_roots(system, opts: RootOptions = RootOptions()) -> np.ndarray:
    """Distinct real roots of the system, one per row, deterministically ordered.

    Every returned point has normalized residual L2 norm below opts.tol_res;
    points within opts.tol_dup of a better-residual root are dropped. Raises
    NoRootsFound when no seed converges.
    """
    if len(system) < 3:
        raise ValueError("need at least 3 polynomials in 3 unknowns")
    C, deg = _stack_system(system)
    if C.shape[0] < 3:
        # nearly all equations vanished identically: degenerate configuration
        raise NoRootsFound("fewer than 3 informative polynomials")
    Cx = _derivative_rows(C, deg, 0)
    Cy = _derivative_rows(C, deg, 1)
    Cz = _derivative_rows(C, deg, 2)
    exp_full = np.ascontiguousarray(exponents(deg))
    exp_diff = np.ascontiguousarray(exponents(deg - 1))

    backend = _kernels.get_backend(opts.backend)
    stop_res = min(opts.tol_res * 1e-4, 1e-14)
    args = (
        np.ascontiguousarray(C),
        np.ascontiguousarray(Cx),
        np.ascontiguousarray(Cy),
        np.ascontiguousarray(Cz),
        exp_full,
        exp_diff,
    )

    def polish(seeds):
        pts, rn = backend.gauss_newton_roots(
            *args, np.ascontiguousarray(seeds), opts.newton_iters, opts.max_damping, stop_res
        )
        ok = np.isfinite(rn) & (rn < opts.tol_res) & np.all(np.isfinite(pts), axis=1)
        return pts[ok], rn[ok]

    def dedup(pts, rn):
        order = np.argsort(rn, kind="stable")
        kept = []
        for i in order:
            if len(kept) >= opts.max_roots:
                break
            if all(np.linalg.norm(pts[i] - pts[j]) >= opts.tol_dup for j in kept):
                kept.append(i)
        return pts[kept], rn[kept]

    pts, rn = polish(opts.seeds())
    if len(pts) and opts.refine_deltas:
        # second wave: hop around found roots to pick up narrow basins
        roots0, _ = dedup(pts, rn)
        dirs = lattice_directions()
        wave = np.concatenate(
            [(roots0[:, None, :] + d * dirs[None, :, :]).reshape(-1, 3) for d in opts.refine_deltas]
        )
        pts2, rn2 = polish(wave)
        pts = np.vstack([pts, pts2])
        rn = np.concatenate([rn, rn2])

    if not len(pts):
        raise NoRootsFound(f"no seed converged below {opts.tol_res:g}")
    roots, _ = dedup(pts, rn)
    norms = np.linalg.norm(roots, axis=1)
    final = np.lexsort((roots[:, 2], roots[:, 1], roots[:, 0], norms))
    return roots[final]
