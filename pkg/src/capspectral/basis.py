"""The cap basis Q_{n,k,i}(x, y, z) = R^{(a,2k)}_{n-k}(z) rho(z)^k Y_{k,i}(theta).

Provides point evaluation, the Jacobi matrices for multiplication by x, y, z,
the Clenshaw recurrence matrices, and Clenshaw evaluation of expansions.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from . import semiclassical as sc
from .bbb import BandedBlockBanded
from .coeffs import BasisSpec, Ordering, block_sizes, degree_major_index, reorder
from .harmonics import Y0, multiply_by

__all__ = [
    "CapPoint", "CapPointError", "DegenerateRecurrenceError", "ClenshawMatrices",
    "as_points", "rho_power_harmonics", "eval_Q", "eval_basis", "norm_squared",
    "jacobi_operator", "jacobi_matrix", "clenshaw_matrices", "evaluate",
]

JACOBI_SUB_BANDWIDTHS = {"x": (2, 2), "y": (3, 3), "z": (0, 0)}


class CapPointError(ValueError):
    pass


class DegenerateRecurrenceError(ArithmeticError):
    pass


@dataclass(frozen=True)
class CapPoint:
    x: float
    y: float
    z: float

    def validate(self, alpha=None, tol=1e-12):
        if abs(self.x**2 + self.y**2 + self.z**2 - 1) > tol:
            raise CapPointError(f"point {self} is not on the unit sphere")
        if alpha is not None and not alpha - tol <= self.z <= 1 + tol:
            raise CapPointError(f"point {self} lies below the cap z >= {alpha}")
        return self


def as_points(p, alpha=None, tol=1e-12, check=True):
    """Coerce CapPoint(s) or an (..., 3) array to an (m, 3) float array."""
    if isinstance(p, CapPoint):
        p = [p.x, p.y, p.z]
    elif isinstance(p, (list, tuple)) and p and isinstance(p[0], CapPoint):
        p = [[q.x, q.y, q.z] for q in p]
    pts = np.atleast_2d(np.asarray(p, dtype=float))
    if pts.shape[-1] != 3:
        raise CapPointError(f"points must have three coordinates, got shape {pts.shape}")
    pts = pts.reshape(-1, 3)
    if check and len(pts):
        r2 = np.sum(pts**2, axis=1)
        bad = np.flatnonzero(np.abs(r2 - 1) > tol)
        if bad.size:
            raise CapPointError(f"point {bad[0]} is not on the unit sphere")
        if alpha is not None:
            bad = np.flatnonzero((pts[:, 2] < alpha - tol) | (pts[:, 2] > 1 + tol))
            if bad.size:
                raise CapPointError(f"point {bad[0]} lies outside the cap z >= {alpha}")
    return pts


def rho_power_harmonics(x, y, k_max):
    """rho^k cos(k theta) and rho^k sin(k theta) for k = 0..k_max, as Re/Im of (x + iy)^k.

    Never divides by rho, so the pole is handled without special cases.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    c = np.empty((k_max + 1,) + x.shape)
    s = np.empty((k_max + 1,) + x.shape)
    c[0], s[0] = 1.0, 0.0
    for k in range(k_max):
        c[k + 1] = x * c[k] - y * s[k]
        s[k + 1] = y * c[k] + x * s[k]
    return c, s


def _table(spec, k, n_max):
    return sc.family(spec.alpha, spec.a, 2 * k, n_max)


def norm_squared(spec, k):
    """||Q_{n,k,i}||^2 = pi * omega^{(a,2k)} under the weight (z - alpha)^a."""
    return np.pi * np.exp(_table(spec, k, 0).log_omega)


def eval_Q(spec, n, k, i, p):
    """Q_{n,k,i} at cap point(s) p."""
    if not 0 <= k <= n <= spec.N or i not in (0, 1) or (k == 0 and i == 1):
        raise IndexError(f"invalid basis index ({n}, {k}, {i}) for N={spec.N}")
    pts = as_points(p, spec.alpha)
    x, y, z = pts.T
    radial = sc.eval_R(_table(spec, k, n - k), n - k, z)
    if k == 0:
        out = Y0 * radial
    else:
        c, s = rho_power_harmonics(x, y, k)
        out = radial * (c[k] if i == 0 else s[k])
    if isinstance(p, CapPoint) or np.ndim(p) == 1:
        return float(out[0])
    return out


def eval_basis(spec, p):
    """Matrix of every Q_{n,k,i}, n <= N, at points p: shape (m, (N+1)^2), DegreeMajor columns."""
    pts = as_points(p, spec.alpha)
    x, y, z = pts.T
    N = spec.N
    c, s = rho_power_harmonics(x, y, N)
    out = np.empty((len(pts), spec.dim))
    for k in range(N + 1):
        R = sc.eval_R_all(_table(spec, k, N - k), N - k, z)[0]
        for n in range(k, N + 1):
            if k == 0:
                out[:, n * n] = Y0 * R[n]
            else:
                col = int(degree_major_index(n, k, 0))
                out[:, col] = R[n - k] * c[k]
                out[:, col + 1] = R[n - k] * s[k]
    return out


# ------------------------------------------------------------------ Jacobi
def _radial_cross(spec, k, j, N, n_rows):
    """Inner products S[n', m'] = <R^{(a,2k)}_{n'} rho^{k-j+1}, R^{(a,2j)}_{m'}> for j = k +- 1.

    Normalised by the total weight of family (a, 2j).  Only the three
    diagonals m' - n' in {-2, -1, 0} (j = k + 1) or {0, 1, 2} (j = k - 1)
    that the recurrence can reach are returned, as a dict offset -> array
    indexed by n'.
    """
    n_k = n_rows - k  # rows n' = 0..n_k
    m_j = N + 1 - j
    deg = n_k + m_j + (2 if j == k - 1 else 0)
    m = deg // 2 + 1 + 8
    tab_j = _table(spec, j, m)
    tab_k = _table(spec, k, max(n_k, 0))
    rule = sc.gauss_rule(tab_j, m)
    scale = np.exp((rule.log_weights - tab_j.log_omega) / 2)
    Rj = sc.eval_R_all(tab_j, m_j, rule.nodes, 0, scale)[0]
    Rk = sc.eval_R_all(tab_k, n_k, rule.nodes, 0, scale)[0]
    if j == k - 1:
        Rk = Rk * (1 - rule.nodes**2)
    offsets = (-2, -1, 0) if j == k + 1 else (0, 1, 2)
    out = {}
    for d in offsets:
        n_idx = np.arange(n_k + 1)
        ok = (n_idx + d >= 0) & (n_idx + d <= m_j)
        vals = np.zeros(n_k + 1)
        vals[ok] = np.einsum("ij,ij->i", Rk[n_idx[ok]], Rj[n_idx[ok] + d])
        out[d] = vals
    return out


@lru_cache(maxsize=32)
def _jacobi_coo(alpha, a, N, axis):
    """Rows (n <= N), columns (m <= N + 1) and values of J_axis, DegreeMajor indices."""
    spec = BasisSpec(alpha, a, N)
    rows, cols, vals = [], [], []
    if axis == "z":
        for k in range(N + 1):
            tab = _table(spec, k, N + 1 - k)
            for i in ((0,) if k == 0 else (0, 1)):
                for n in range(k, N + 1):
                    r = int(degree_major_index(n, k, i))
                    nk = n - k
                    rows += [r, r]
                    cols += [int(degree_major_index(n + 1, k, i)), r]
                    vals += [tab.betas[nk], tab.alphas[nk]]
                    if nk > 0:
                        rows.append(r)
                        cols.append(int(degree_major_index(n - 1, k, i)))
                        vals.append(tab.betas[nk - 1])
    else:
        factor = "cos" if axis == "x" else "sin"
        cross = {}
        for k in range(N + 1):
            for i in ((0,) if k == 0 else (0, 1)):
                for coef, idx in multiply_by((k, i), factor):
                    j, h = idx.k, idx.i
                    if (k, j) not in cross:
                        cross[k, j] = _radial_cross(spec, k, j, N, N)
                    for d, arr in cross[k, j].items():
                        for n in range(k, N + 1):
                            m = j + (n - k) + d
                            if not (j <= m <= N + 1 and abs(m - n) <= 1):
                                continue
                            rows.append(int(degree_major_index(n, k, i)))
                            cols.append(int(degree_major_index(m, j, h)))
                            vals.append(coef * arr[n - k])
    return np.array(rows), np.array(cols), np.array(vals, dtype=float)


def jacobi_operator(spec, axis, n_cols=None):
    """Sparse J_axis with rows of degree <= N and columns of degree <= N + 1.

    Row (n, k, i) holds the expansion of coordinate * Q_{n,k,i}.
    """
    if axis not in ("x", "y", "z"):
        raise ValueError(f"axis must be x, y or z, got {axis!r}")
    r, c, v = _jacobi_coo(float(spec.alpha), int(spec.a), int(spec.N), axis)
    return sp.csr_matrix((v, (r, c)), shape=(spec.dim, (spec.N + 2) ** 2))


def jacobi_matrix(spec, axis, tol=1e-14):
    """Square-truncated J_axis as a DegreeMajor banded-block-banded matrix."""
    J = jacobi_operator(spec, axis)[:, : spec.dim].tocoo()
    J.data[np.abs(J.data) < tol] = 0.0
    sizes = block_sizes(spec.N, Ordering.DEGREE_MAJOR)
    return BandedBlockBanded.from_sparse(J, sizes, sizes, (1, 1), JACOBI_SUB_BANDWIDTHS[axis],
                                         Ordering.DEGREE_MAJOR)


# ---------------------------------------------------------------- Clenshaw
@dataclass(frozen=True, eq=False)
class ClenshawMatrices:
    """Per-degree A_n, B_n, C_n (stacked x, y, z blocks) and left inverses D_n^T."""
    spec: BasisSpec
    A: tuple
    B: tuple
    C: tuple
    Dt: tuple


def _block(M, n, m):
    return M[n * n:(n + 1) ** 2, m * m:(m + 1) ** 2]


@lru_cache(maxsize=16)
def _clenshaw_cached(alpha, a, N):
    spec = BasisSpec(alpha, a, N)
    J = [jacobi_operator(spec, ax).tocsr() for ax in ("x", "y", "z")]
    A, B, C, Dt = [], [], [], []
    for n in range(N + 1):
        An = sp.vstack([_block(M, n, n + 1) for M in J]).tocsr()
        Bn = sp.vstack([_block(M, n, n) for M in J]).tocsr()
        Cn = sp.vstack([_block(M, n, n - 1) for M in J]).tocsr() if n > 0 else sp.csr_matrix((3, 0))
        A.append(An)
        B.append(Bn)
        C.append(Cn)
        Dt.append(_left_inverse(An, n))
    return ClenshawMatrices(spec, tuple(A), tuple(B), tuple(C), tuple(Dt))


def clenshaw_matrices(spec):
    return _clenshaw_cached(float(spec.alpha), int(spec.a), int(spec.N))


def _loc(k, i):
    return 0 if k == 0 else 2 * k - 1 + i


def _left_inverse(An, n):
    """Sparse D_n^T with D_n^T A_n = I, using the x/y/z row structure of A_n.

    Columns (n+1, k, i) with k <= n are reached only from the z rows; the two
    new columns (n+1, n+1, i) come from a y row (i = 0) or an x row (i = 1),
    with the z row that shares its second nonzero used to cancel it.
    """
    A = An.toarray()
    size = 2 * n + 1
    X, Y, Z = 0, size, 2 * size
    Dt = np.zeros((2 * n + 3, 3 * size))

    def pivot(row, col):
        v = A[row, col]
        if v == 0 or not np.isfinite(v):
            raise DegenerateRecurrenceError(f"zero pivot in A_{n} at ({row}, {col})")
        return v

    if n == 0:
        Dt[0, Z] = 1 / pivot(Z, 0)
        Dt[1, X] = 1 / pivot(X, 1)
        Dt[2, Y] = 1 / pivot(Y, 2)
        return sp.csr_matrix(Dt)
    for k in range(n + 1):
        for i in ((0,) if k == 0 else (0, 1)):
            r, c = Z + _loc(k, i), _loc(k, i)
            Dt[c, r] = 1 / pivot(r, c)
    # column (n+1, n+1, 0) from the y row of (n, n, 1)
    c_new, c_old = _loc(n + 1, 0), _loc(n - 1, 0)
    ry, rz = Y + _loc(n, 1), Z + _loc(n - 1, 0)
    p = pivot(ry, c_new)
    Dt[c_new, ry] = 1 / p
    Dt[c_new, rz] = -A[ry, c_old] / (p * pivot(rz, c_old))
    # column (n+1, n+1, 1) from the x row of (n, n, 1)
    c_new = _loc(n + 1, 1)
    rx = X + _loc(n, 1)
    p = pivot(rx, c_new)
    Dt[c_new, rx] = 1 / p
    if n > 1:
        c_old = _loc(n - 1, 1)
        rz = Z + _loc(n - 1, 1)
        Dt[c_new, rz] = -A[rx, c_old] / (p * pivot(rz, c_old))
    return sp.csr_matrix(Dt)


def evaluate(coeffs, p, weighted=None):
    """Value of the expansion at cap point(s) by the backward Clenshaw recurrence.

    Weighted expansions (the default follows ``coeffs.weighted``) are
    multiplied by (z - alpha)^a.
    """
    spec = coeffs.spec
    pts = as_points(p, spec.alpha, check=True)
    f = reorder(coeffs, Ordering.DEGREE_MAJOR).values
    x, y, z = pts.T
    N = spec.N
    if len(pts) == 0:
        return np.zeros(0)
    cm = clenshaw_matrices(spec)
    m = len(pts)
    xi_next = np.zeros((0, m))       # xi_{n+1}
    u_next = np.zeros((0, m))        # D_{n+1} xi_{n+2}
    for n in range(N, -1, -1):
        xi = np.repeat(f[n * n:(n + 1) ** 2, None], m, axis=1)
        size = 2 * n + 1
        if n < N:
            u = cm.Dt[n].T @ xi_next
            xi += x * u[:size] + y * u[size:2 * size] + z * u[2 * size:]
            xi -= cm.B[n].T @ u
        else:
            u = np.zeros((3 * size, m))
        if n + 1 < N:
            xi -= cm.C[n + 1].T @ u_next
        xi_next, u_next = xi, u
    out = Y0 * xi_next[0]
    if weighted is None:
        weighted = coeffs.weighted
    if weighted and spec.a:
        out = out * (z - spec.alpha) ** spec.a
    return out
