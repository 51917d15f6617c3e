"""Pure-NumPy multi-start damped Gauss-Newton kernel.

Same per-seed algorithm as the compiled kernel, vectorized across seeds.
The step solves the linearized least-squares problem through QR (not the
normal equations, which square the conditioning), then backtracks by
halving; a steepest-descent halving pass is the last resort before a seed
is abandoned. Coefficient rows are assumed pre-normalized by the caller.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"


def _basis(points: np.ndarray, exps: np.ndarray) -> np.ndarray:
    deg = int(exps.max()) if exps.size else 0
    pows = []
    for axis in range(3):
        t = np.ones((points.shape[0], deg + 1))
        for k in range(1, deg + 1):
            t[:, k] = t[:, k - 1] * points[:, axis]
        pows.append(t)
    return pows[0][:, exps[:, 0]] * pows[1][:, exps[:, 1]] * pows[2][:, exps[:, 2]]


def _qr_step(J: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Least-squares Gauss-Newton steps, batched; J is (S, N, 3)."""
    Q, R = np.linalg.qr(J)
    rhs = -np.einsum("snk,sn->sk", Q, r)
    # guard exactly singular R so solve cannot raise; huge steps are fine,
    # the backtracking line search shrinks them
    diag = np.abs(np.diagonal(R, axis1=1, axis2=2))
    bad = diag < 1e-300
    if bad.any():
        R = R.copy()
        for k in range(3):
            R[bad[:, k], k, k] = 1e-300
    return np.linalg.solve(R, rhs[..., None])[..., 0]


def gauss_newton_roots(
    C: np.ndarray,
    Cx: np.ndarray,
    Cy: np.ndarray,
    Cz: np.ndarray,
    exp_full: np.ndarray,
    exp_diff: np.ndarray,
    seeds: np.ndarray,
    max_iter: int,
    max_halvings: int,
    stop_res: float,
):
    """Polish every seed; returns (points, residual L2 norms)."""
    q = np.array(seeds, dtype=float)

    def residuals(pts):
        r = _basis(pts, exp_full) @ C.T
        return r, np.linalg.norm(r, axis=1)

    r, rn = residuals(q)
    active = rn > stop_res

    def line_search(idx, qa, steps, improved):
        """Backtracking on the given directions; updates q/r/rn in place."""
        alpha = np.ones(len(idx))
        pending = ~improved & (np.linalg.norm(steps, axis=1) > 1e-16 * (1.0 + np.linalg.norm(qa, axis=1)))
        for _h in range(max_halvings + 1):
            if not pending.any():
                break
            p = np.nonzero(pending)[0]
            qt = qa[p] + alpha[p, None] * steps[p]
            rt, rtn = residuals(qt)
            ok = rtn < rn[idx[p]]
            acc = p[ok]
            qa[acc] = qt[ok]
            r[idx[acc]] = rt[ok]
            rn[idx[acc]] = rtn[ok]
            improved[acc] = True
            pending[acc] = False
            alpha[pending] *= 0.5
        return improved

    for _ in range(max_iter):
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        qa, ra = q[idx], r[idx]
        md = _basis(qa, exp_diff)
        J = np.stack([md @ Cx.T, md @ Cy.T, md @ Cz.T], axis=2)
        improved = np.zeros(len(idx), dtype=bool)
        improved = line_search(idx, qa, _qr_step(J, ra), improved)

        if not improved.all():
            # steepest descent with its exact step for the linearized model
            g = np.einsum("snk,sn->sk", J, r[idx])
            Jg = np.einsum("snk,sk->sn", J, g)
            den = np.einsum("sn,sn->s", Jg, Jg)
            gg = np.einsum("sk,sk->s", g, g)
            scale = np.where(den > 0, gg / np.maximum(den, 1e-300), 0.0)
            improved = line_search(idx, qa, -scale[:, None] * g, improved)

        q[idx] = qa
        active[idx[~improved]] = False
        active[idx[rn[idx] <= stop_res]] = False

    return q, rn
