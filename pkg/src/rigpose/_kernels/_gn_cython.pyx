# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled multi-start damped Gauss-Newton kernel.

Per-seed algorithm identical to numpy_backend.gauss_newton_roots: QR-based
least-squares steps with a backtracking line search and a steepest-descent
fallback. This is the hot loop of every RANSAC hypothesis.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

NAME = "cython"


cdef inline void _powers(double v, double* table, int deg) noexcept nogil:
    cdef int k
    table[0] = 1.0
    for k in range(1, deg + 1):
        table[k] = table[k - 1] * v


cdef inline void _monomials(double qx, double qy, double qz,
                            const cnp.int64_t[:, ::1] exps, int deg,
                            double* mono, int m) noexcept nogil:
    cdef double px[16]
    cdef double py[16]
    cdef double pz[16]
    cdef int i
    _powers(qx, px, deg)
    _powers(qy, py, deg)
    _powers(qz, pz, deg)
    for i in range(m):
        mono[i] = px[exps[i, 0]] * py[exps[i, 1]] * pz[exps[i, 2]]


cdef inline double _residual_norm2(const double[:, ::1] C, double* mono, double* r,
                                   int n, int m) noexcept nogil:
    cdef int i, j
    cdef double acc, total = 0.0
    for i in range(n):
        acc = 0.0
        for j in range(m):
            acc += C[i, j] * mono[j]
        r[i] = acc
        total += acc * acc
    return total


cdef inline void _qr_step(double* J, double* rhs, int n, double* step) noexcept nogil:
    """Least-squares solve of J step = rhs via Householder QR; J is n x 3
    row-major and is destroyed, rhs (length n) is destroyed."""
    cdef int k, i, j
    cdef double norm, alpha, beta, dot, vk
    cdef double R[9]
    for k in range(3):
        norm = 0.0
        for i in range(k, n):
            norm += J[3 * i + k] * J[3 * i + k]
        norm = sqrt(norm)
        if norm == 0.0:
            norm = 1e-300
        alpha = -norm if J[3 * k + k] >= 0.0 else norm
        # Householder vector v: v_k = J_kk - alpha, v_i = J_ik below
        vk = J[3 * k + k] - alpha
        beta = alpha * vk  # = -0.5 * |v|^2
        if beta == 0.0:
            beta = -1e-300
        J[3 * k + k] = vk
        for j in range(k + 1, 3):
            dot = 0.0
            for i in range(k, n):
                dot += J[3 * i + k] * J[3 * i + j]
            dot /= beta
            for i in range(k, n):
                J[3 * i + j] += dot * J[3 * i + k]
        dot = 0.0
        for i in range(k, n):
            dot += J[3 * i + k] * rhs[i]
        dot /= beta
        for i in range(k, n):
            rhs[i] += dot * J[3 * i + k]
        R[3 * k + k] = alpha
        for j in range(k + 1, 3):
            R[3 * k + j] = J[3 * k + j]
    for k in range(2, -1, -1):
        dot = rhs[k]
        for j in range(k + 1, 3):
            dot -= R[3 * k + j] * step[j]
        norm = R[3 * k + k]
        if norm == 0.0:
            norm = 1e-300
        step[k] = dot / norm


def gauss_newton_roots(const double[:, ::1] C, const double[:, ::1] Cx,
                       const double[:, ::1] Cy, const double[:, ::1] Cz,
                       const cnp.int64_t[:, ::1] exp_full,
                       const cnp.int64_t[:, ::1] exp_diff,
                       const double[:, ::1] seeds,
                       int max_iter, int max_halvings, double stop_res):
    """Polish every seed; returns (points, residual L2 norms)."""
    cdef int S = seeds.shape[0]
    cdef int N = C.shape[0]
    cdef int M = C.shape[1]
    cdef int Md = Cx.shape[1]
    cdef int deg = 0, deg_d = 0
    cdef Py_ssize_t i
    for i in range(exp_full.shape[0]):
        if exp_full[i, 0] > deg: deg = exp_full[i, 0]
        if exp_full[i, 1] > deg: deg = exp_full[i, 1]
        if exp_full[i, 2] > deg: deg = exp_full[i, 2]
    for i in range(exp_diff.shape[0]):
        if exp_diff[i, 0] > deg_d: deg_d = exp_diff[i, 0]
        if exp_diff[i, 1] > deg_d: deg_d = exp_diff[i, 1]
        if exp_diff[i, 2] > deg_d: deg_d = exp_diff[i, 2]
    if deg >= 16 or deg_d >= 16:
        raise ValueError("degree too large for the compiled kernel")

    out_q = np.array(seeds, dtype=np.float64)
    out_rn = np.empty(S, dtype=np.float64)
    cdef double[:, ::1] q = out_q
    cdef double[::1] rn = out_rn

    buf = np.empty((3, N), dtype=np.float64)
    cdef double[:, ::1] work = buf
    mono_arr = np.empty(M if M > Md else Md, dtype=np.float64)
    cdef double[::1] mono = mono_arr
    jac_arr = np.empty(3 * N, dtype=np.float64)
    cdef double[::1] jac = jac_arr

    cdef int s, it, h, n, k, improved
    cdef double rn2, rt2, stop2, alpha, jx, jy, jz, dot
    cdef double qx, qy, qz, tx, ty, tz, snorm, qnorm, gg, den
    cdef double step[3]
    cdef double g[3]

    stop2 = stop_res * stop_res

    with nogil:
        for s in range(S):
            qx = q[s, 0]; qy = q[s, 1]; qz = q[s, 2]
            _monomials(qx, qy, qz, exp_full, deg, &mono[0], M)
            rn2 = _residual_norm2(C, &mono[0], &work[0, 0], N, M)
            for it in range(max_iter):
                if rn2 <= stop2:
                    break
                _monomials(qx, qy, qz, exp_diff, deg_d, &mono[0], Md)
                g[0] = 0.0; g[1] = 0.0; g[2] = 0.0
                for n in range(N):
                    jx = 0.0; jy = 0.0; jz = 0.0
                    for k in range(Md):
                        jx += Cx[n, k] * mono[k]
                        jy += Cy[n, k] * mono[k]
                        jz += Cz[n, k] * mono[k]
                    jac[3 * n] = jx; jac[3 * n + 1] = jy; jac[3 * n + 2] = jz
                    g[0] += jx * work[0, n]; g[1] += jy * work[0, n]; g[2] += jz * work[0, n]
                    work[1, n] = -work[0, n]  # rhs for the QR solve
                # |J g|^2 for the descent fallback, before QR destroys jac
                den = 0.0
                for n in range(N):
                    dot = jac[3 * n] * g[0] + jac[3 * n + 1] * g[1] + jac[3 * n + 2] * g[2]
                    den += dot * dot
                _qr_step(&jac[0], &work[1, 0], N, step)

                improved = 0
                snorm = sqrt(step[0] * step[0] + step[1] * step[1] + step[2] * step[2])
                qnorm = sqrt(qx * qx + qy * qy + qz * qz)
                if snorm > 1e-16 * (1.0 + qnorm):
                    alpha = 1.0
                    for h in range(max_halvings + 1):
                        tx = qx + alpha * step[0]
                        ty = qy + alpha * step[1]
                        tz = qz + alpha * step[2]
                        _monomials(tx, ty, tz, exp_full, deg, &mono[0], M)
                        rt2 = _residual_norm2(C, &mono[0], &work[2, 0], N, M)
                        if rt2 < rn2:
                            qx = tx; qy = ty; qz = tz
                            rn2 = rt2
                            for n in range(N):
                                work[0, n] = work[2, n]
                            improved = 1
                            break
                        alpha *= 0.5

                if not improved:
                    # steepest descent with the exact linearized step length
                    gg = g[0] * g[0] + g[1] * g[1] + g[2] * g[2]
                    if den > 0.0 and gg > 0.0:
                        step[0] = -g[0] * gg / den
                        step[1] = -g[1] * gg / den
                        step[2] = -g[2] * gg / den
                        snorm = sqrt(step[0] * step[0] + step[1] * step[1] + step[2] * step[2])
                        if snorm > 1e-16 * (1.0 + qnorm):
                            alpha = 1.0
                            for h in range(max_halvings + 1):
                                tx = qx + alpha * step[0]
                                ty = qy + alpha * step[1]
                                tz = qz + alpha * step[2]
                                _monomials(tx, ty, tz, exp_full, deg, &mono[0], M)
                                rt2 = _residual_norm2(C, &mono[0], &work[2, 0], N, M)
                                if rt2 < rn2:
                                    qx = tx; qy = ty; qz = tz
                                    rn2 = rt2
                                    for n in range(N):
                                        work[0, n] = work[2, n]
                                    improved = 1
                                    break
                                alpha *= 0.5
                if not improved:
                    break
            q[s, 0] = qx; q[s, 1] = qy; q[s, 2] = qz
            rn[s] = sqrt(rn2)

    return out_q, out_rn
