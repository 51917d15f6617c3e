"""Dense trivariate polynomials and polynomial matrices.

Coefficients are stored in a flat vector indexed by the canonical monomial
order of exponents(D): all (a, b, c) with a+b+c <= D, graded by total
degree. All products used by the constraint pipeline are small (degree 2
entries, degree 6 determinants), so multiplication goes through cached
index tables instead of a general convolution.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .exceptions import UnsupportedSize


def n_monomials(max_degree: int) -> int:
    d = max_degree
    return (d + 1) * (d + 2) * (d + 3) // 6


@lru_cache(maxsize=None)
def exponents(max_degree: int) -> np.ndarray:
    """(M, 3) exponent rows in graded order; index 0 is the constant term."""
    rows = []
    for d in range(max_degree + 1):
        for a in range(d, -1, -1):
            for b in range(d - a, -1, -1):
                rows.append((a, b, d - a - b))
    out = np.array(rows, dtype=np.int64)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _index_of(max_degree: int):
    return {tuple(e): i for i, e in enumerate(exponents(max_degree))}


@lru_cache(maxsize=None)
def _mul_table(d1: int, d2: int):
    """Index triplets (i, j, k): monomial i (deg<=d1) * j (deg<=d2) -> k."""
    e1, e2 = exponents(d1), exponents(d2)
    idx = _index_of(d1 + d2)
    ii, jj, kk = [], [], []
    for i, a in enumerate(e1):
        for j, b in enumerate(e2):
            ii.append(i)
            jj.append(j)
            kk.append(idx[tuple(a + b)])
    return np.array(ii), np.array(jj), np.array(kk)


@lru_cache(maxsize=None)
def _mul_scatter(d1: int, d2: int):
    """Dense (pairs, out_monomials) scatter matrix; keeps products in BLAS."""
    ii, jj, kk = _mul_table(d1, d2)
    S = np.zeros((len(kk), n_monomials(d1 + d2)))
    S[np.arange(len(kk)), kk] = 1.0
    S.setflags(write=False)
    return ii, jj, S


@lru_cache(maxsize=None)
def _diff_table(max_degree: int, axis: int):
    """(src, dst, factor) triplets implementing d/dq_axis."""
    e = exponents(max_degree)
    idx = _index_of(max_degree - 1)
    src, dst, fac = [], [], []
    for i, mono in enumerate(e):
        if mono[axis] == 0:
            continue
        lowered = mono.copy()
        lowered[axis] -= 1
        src.append(i)
        dst.append(idx[tuple(lowered)])
        fac.append(float(mono[axis]))
    return np.array(src), np.array(dst), np.array(fac)


def monomial_basis(points: np.ndarray, max_degree: int) -> np.ndarray:
    """Evaluate every monomial at each point; points is (S, 3) or (3,)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    e = exponents(max_degree)
    powers = []
    for axis in range(3):
        table = np.ones((pts.shape[0], max_degree + 1))
        for k in range(1, max_degree + 1):
            table[:, k] = table[:, k - 1] * pts[:, axis]
        powers.append(table)
    return powers[0][:, e[:, 0]] * powers[1][:, e[:, 1]] * powers[2][:, e[:, 2]]


def mul_coeffs(c1: np.ndarray, d1: int, c2: np.ndarray, d2: int) -> np.ndarray:
    """Product of coefficient blocks; supports leading batch dimensions."""
    ii, jj, S = _mul_scatter(d1, d2)
    return (c1[..., ii] * c2[..., jj]) @ S


class TrivariatePoly:
    """Polynomial in (q_x, q_y, q_z) with dense graded coefficient storage."""

    __slots__ = ("coeffs", "max_degree")

    def __init__(self, coeffs, max_degree: int):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (n_monomials(max_degree),):
            raise ValueError("coefficient vector does not match max_degree")
        self.coeffs = coeffs
        self.max_degree = max_degree

    @classmethod
    def zero(cls, max_degree: int = 0) -> "TrivariatePoly":
        return cls(np.zeros(n_monomials(max_degree)), max_degree)

    @classmethod
    def constant(cls, value: float, max_degree: int = 0) -> "TrivariatePoly":
        p = cls.zero(max_degree)
        p.coeffs[0] = value
        return p

    @classmethod
    def from_terms(cls, terms: dict, max_degree: int | None = None) -> "TrivariatePoly":
        """Build from {(a, b, c): coefficient}."""
        deg = max((sum(k) for k in terms), default=0)
        if max_degree is None:
            max_degree = deg
        elif max_degree < deg:
            raise ValueError("max_degree below actual degree")
        p = cls.zero(max_degree)
        idx = _index_of(max_degree)
        for mono, coef in terms.items():
            p.coeffs[idx[tuple(mono)]] += coef
        return p

    def degree(self) -> int:
        """Actual total degree (0 for the zero polynomial)."""
        nz = np.nonzero(self.coeffs)[0]
        if len(nz) == 0:
            return 0
        return int(exponents(self.max_degree)[nz].sum(axis=1).max())

    def padded(self, max_degree: int) -> "TrivariatePoly":
        if max_degree < self.max_degree:
            raise ValueError("cannot shrink below stored degree bound")
        out = TrivariatePoly.zero(max_degree)
        out.coeffs[: len(self.coeffs)] = self.coeffs
        return out

    def evaluate(self, q) -> float | np.ndarray:
        q = np.asarray(q, dtype=float)
        vals = monomial_basis(q, self.max_degree) @ self.coeffs
        return float(vals[0]) if q.ndim == 1 else vals

    def derivative(self, axis: int) -> "TrivariatePoly":
        if self.max_degree == 0:
            return TrivariatePoly.zero(0)
        src, dst, fac = _diff_table(self.max_degree, axis)
        out = TrivariatePoly.zero(self.max_degree - 1)
        np.add.at(out.coeffs, dst, self.coeffs[src] * fac)
        return out

    def max_abs(self) -> float:
        return float(np.abs(self.coeffs).max())

    def _aligned(self, other):
        d = max(self.max_degree, other.max_degree)
        return self.padded(d) if self.max_degree < d else self, (
            other.padded(d) if other.max_degree < d else other
        )

    def __add__(self, other: "TrivariatePoly") -> "TrivariatePoly":
        a, b = self._aligned(other)
        return TrivariatePoly(a.coeffs + b.coeffs, a.max_degree)

    def __sub__(self, other: "TrivariatePoly") -> "TrivariatePoly":
        a, b = self._aligned(other)
        return TrivariatePoly(a.coeffs - b.coeffs, a.max_degree)

    def __neg__(self) -> "TrivariatePoly":
        return TrivariatePoly(-self.coeffs, self.max_degree)

    def __mul__(self, other):
        if isinstance(other, TrivariatePoly):
            return TrivariatePoly(
                mul_coeffs(self.coeffs, self.max_degree, other.coeffs, other.max_degree),
                self.max_degree + other.max_degree,
            )
        return TrivariatePoly(self.coeffs * float(other), self.max_degree)

    __rmul__ = __mul__

    def __repr__(self):
        return f"TrivariatePoly(max_degree={self.max_degree}, nnz={int(np.count_nonzero(self.coeffs))})"


class PolyMatrix:
    """Rectangular grid of TrivariatePoly, stored as one coefficient tensor."""

    __slots__ = ("tensor", "max_degree")

    def __init__(self, tensor: np.ndarray, max_degree: int):
        tensor = np.asarray(tensor, dtype=float)
        if tensor.ndim != 3 or tensor.shape[2] != n_monomials(max_degree):
            raise ValueError("tensor must be (rows, cols, n_monomials)")
        self.tensor = tensor
        self.max_degree = max_degree

    @classmethod
    def from_entries(cls, entries) -> "PolyMatrix":
        rows = len(entries)
        cols = len(entries[0])
        deg = max(p.max_degree for row in entries for p in row)
        tensor = np.zeros((rows, cols, n_monomials(deg)))
        for i, row in enumerate(entries):
            if len(row) != cols:
                raise ValueError("ragged rows")
            for j, p in enumerate(row):
                tensor[i, j, : len(p.coeffs)] = p.coeffs
        return cls(tensor, deg)

    @property
    def shape(self):
        return self.tensor.shape[:2]

    def entry(self, i: int, j: int) -> TrivariatePoly:
        return TrivariatePoly(self.tensor[i, j].copy(), self.max_degree)

    def submatrix(self, rows, cols) -> "PolyMatrix":
        return PolyMatrix(self.tensor[np.ix_(rows, cols)], self.max_degree)

    def evaluate(self, q) -> np.ndarray:
        basis = monomial_basis(np.asarray(q, dtype=float), self.max_degree)[0]
        return self.tensor @ basis

    def entry_degrees(self) -> np.ndarray:
        """Per-entry actual degree bound, as recorded by the nonzero pattern."""
        degs = exponents(self.max_degree).sum(axis=1)
        nz = self.tensor != 0
        out = np.zeros(self.shape, dtype=int)
        for i in range(self.shape[0]):
            for j in range(self.shape[1]):
                idx = np.nonzero(nz[i, j])[0]
                out[i, j] = int(degs[idx].max()) if len(idx) else 0
        return out


def det_poly(M: PolyMatrix) -> TrivariatePoly:
    """Symbolic determinant of a 2x2 or 3x3 polynomial matrix (cofactor expansion)."""
    r, c = M.shape
    if (r, c) == (2, 2):
        a, b = M.entry(0, 0), M.entry(0, 1)
        cc, d = M.entry(1, 0), M.entry(1, 1)
        return a * d - b * cc
    if (r, c) == (3, 3):
        e = [[M.entry(i, j) for j in range(3)] for i in range(3)]
        m0 = e[1][1] * e[2][2] - e[1][2] * e[2][1]
        m1 = e[1][0] * e[2][2] - e[1][2] * e[2][0]
        m2 = e[1][0] * e[2][1] - e[1][1] * e[2][0]
        return e[0][0] * m0 - e[0][1] * m1 + e[0][2] * m2
    raise UnsupportedSize(f"determinant only for 2x2 or 3x3, got {r}x{c}")
