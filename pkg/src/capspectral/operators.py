"""Sparse operator matrices on the cap, stored banded-block-banded in FourierMajor order.

Every differential and conversion operator here commutes with rotations about
the z axis, so it is block diagonal across Fourier modes k.  Inside mode k
the operator acts on the radial factor only: for an input basis function
(z - alpha)^p R_{n-k}(z) rho^k Y_{k,i} with radial part G(z), the image is
rho^k Y_{k,i} h(z), where

    identity   h = G
    rho d/dphi h = k z G - rho^2 G'
    Laplacian  h = rho^2 G'' - 2 (k + 1) z G' - k (k + 1) G

and the matrix entry against output R_{m-k} is a 1D Gauss sum of
R_{m-k} h / (z - alpha)^q, q being the output weight exponent.
"""
from dataclasses import dataclass
from enum import Enum
from math import comb, perm

import numpy as np
import scipy.sparse as sp

from . import semiclassical as sc
from .basis import clenshaw_matrices, jacobi_operator
from .bbb import BandedBlockBanded, product
from .coeffs import (BasisSpec, CoefficientVector, Ordering, block_sizes, fourier_major_index,
                     index_table, reorder)
from .harmonics import Y0
from .transforms import expand

__all__ = [
    "Kind", "OperatorSpec", "DegreeError", "SUB_BLOCK_BANDWIDTHS",
    "assemble", "dtheta", "rho2_laplacian", "biharmonic", "biharmonic_factors", "truncate", "helmholtz_operator",
    "variable_coefficient", "chop_coefficients", "CHOP_TOL", "is_rotationally_invariant", "spy_coo",
]


class DegreeError(ValueError):
    pass


class Kind(str, Enum):
    DTHETA = "Dtheta"
    DPHI = "Dphi"
    WPHI = "Wphi"
    LAPLACIAN = "Laplacian"
    WEIGHTED_LAPLACIAN = "WeightedLaplacian"
    WEIGHTED_LAPLACIAN_A1 = "WeightedLaplacianA1"
    CONVERT_UP = "ConvertUp"
    CONVERT_DOWN = "ConvertDown"
    RHO2_LAPLACIAN = "Rho2Laplacian"
    BIHARMONIC = "Biharmonic"
    VARIABLE_COEFFICIENT = "VariableCoefficient"


# (action, degree band m - n) per elementary kind; the band depends on atilde for
# the Laplacians and conversions.
def _degree_band(kind, atilde):
    return {
        Kind.DPHI: (-2, 1),
        Kind.WPHI: (-1, 2),
        Kind.LAPLACIAN: (-atilde, 0),
        Kind.WEIGHTED_LAPLACIAN: (0, atilde),
        Kind.WEIGHTED_LAPLACIAN_A1: (-1, 1),
        Kind.CONVERT_UP: (-atilde, 0),
        Kind.CONVERT_DOWN: (0, atilde),
    }[kind]


_ACTION = {
    Kind.DPHI: "rho_dphi",
    Kind.WPHI: "rho_dphi",
    Kind.LAPLACIAN: "laplacian",
    Kind.WEIGHTED_LAPLACIAN: "laplacian",
    Kind.WEIGHTED_LAPLACIAN_A1: "laplacian",
    Kind.CONVERT_UP: "identity",
    Kind.CONVERT_DOWN: "identity",
}


def SUB_BLOCK_BANDWIDTHS(kind, atilde=2):
    """Sub-block bandwidths (lam, mu) of each elementary kind."""
    kind = Kind(kind)
    if kind is Kind.DTHETA:
        return (1, 1)
    dmin, dmax = _degree_band(kind, atilde)
    return (2 * dmax, -2 * dmin)


@dataclass(frozen=True)
class OperatorSpec:
    kind: Kind
    alpha: float
    N: int
    a_in: int
    a_out: int
    weighted_in: bool = False
    weighted_out: bool = False
    atilde: int = 2

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.N < 0:
            raise ValueError("N must be non-negative")
        if not -1 < self.alpha < 1:
            raise sc.ParameterError(f"alpha must lie in (-1, 1), got {self.alpha}")
        kind, a, b, t = self.kind, self.a_in, self.a_out, self.atilde
        expected = {
            Kind.DTHETA: (a, self.weighted_in, self.weighted_in),
            Kind.DPHI: (a + 1, False, False),
            Kind.WPHI: (a - 1, True, True),
            Kind.LAPLACIAN: (a + t, False, False),
            Kind.WEIGHTED_LAPLACIAN: (a - t, True, True),
            Kind.WEIGHTED_LAPLACIAN_A1: (1, True, False),
            Kind.CONVERT_UP: (a + t, False, False),
            Kind.CONVERT_DOWN: (a - t, True, True),
            Kind.RHO2_LAPLACIAN: (1, True, False),
            Kind.BIHARMONIC: (2, True, False),
            Kind.VARIABLE_COEFFICIENT: (a, self.weighted_in, self.weighted_in),
        }[kind]
        if (b, self.weighted_in, self.weighted_out) != expected:
            raise sc.ParameterError(f"{kind.value}: inconsistent (a_out, weighted_in, weighted_out) "
                                    f"= {(b, self.weighted_in, self.weighted_out)}, expected {expected}")
        if a < 0 or b < 0:
            raise sc.ParameterError(f"{kind.value}: parameters must be non-negative")
        if kind is Kind.WEIGHTED_LAPLACIAN and a < 2:
            raise sc.ParameterError("the weighted Laplacian needs a_in >= 2")
        if kind is Kind.WEIGHTED_LAPLACIAN_A1 and a != 1:
            raise sc.ParameterError("WeightedLaplacianA1 acts on a = 1 only")
        if kind in (Kind.LAPLACIAN, Kind.WEIGHTED_LAPLACIAN) and t < 2:
            raise sc.ParameterError("Laplacian conversions need atilde >= 2")
        if kind in (Kind.CONVERT_UP, Kind.CONVERT_DOWN) and t < 1:
            raise sc.ParameterError("conversions need atilde >= 1")
        if kind is Kind.RHO2_LAPLACIAN and a != 1:
            raise sc.ParameterError("the rho^2 Laplacian maps a = 1 weighted to a = 1")
        if kind is Kind.BIHARMONIC and a != 2:
            raise sc.ParameterError("the biharmonic maps a = 2 weighted to a = 2")

    @classmethod
    def of(cls, kind, alpha, N, a=None, atilde=2, weighted=False):
        """Spec for ``kind`` acting on family ``a`` with the output family implied by the kind."""
        kind = Kind(kind)
        defaults = {Kind.WEIGHTED_LAPLACIAN_A1: 1, Kind.RHO2_LAPLACIAN: 1, Kind.BIHARMONIC: 2,
                    Kind.WEIGHTED_LAPLACIAN: 2}
        if a is None:
            a = defaults.get(kind, 0)
        out = {
            Kind.DTHETA: (a, weighted, weighted),
            Kind.DPHI: (a + 1, False, False),
            Kind.WPHI: (a - 1, True, True),
            Kind.LAPLACIAN: (a + atilde, False, False),
            Kind.WEIGHTED_LAPLACIAN: (a - atilde, True, True),
            Kind.WEIGHTED_LAPLACIAN_A1: (1, True, False),
            Kind.CONVERT_UP: (a + atilde, False, False),
            Kind.CONVERT_DOWN: (a - atilde, True, True),
            Kind.RHO2_LAPLACIAN: (1, True, False),
            Kind.BIHARMONIC: (2, True, False),
            Kind.VARIABLE_COEFFICIENT: (a, weighted, weighted),
        }[kind]
        return cls(kind, alpha, N, a, out[0], out[1], out[2], atilde)


# ------------------------------------------------------------ radial engine
def _radial_band(alpha, N, k, a_in, a_out, p, q, action, dmin, dmax):
    """Band of the mode-k radial matrix M[m', n'] for m' - n' in [dmin, dmax]; returns {d: array over n'}."""
    size = N - k + 1
    tab_out = sc.family(alpha, a_out, 2 * k, size + 16)
    tab_in = sc.family(alpha, a_in, 2 * k, size)
    # integrand degree: R_out (<= N - k) times h / (z - alpha)^q (<= N - k + p - q + 1)
    deg = 2 * (N - k) + p - q + 1
    m = deg // 2 + 1 + 8
    if tab_out.n_max < m:
        tab_out = sc.family(alpha, a_out, 2 * k, m)
    rule = sc.gauss_rule(tab_out, m)
    t = rule.nodes
    scale = np.exp((rule.log_weights - tab_out.log_omega) / 2)
    Rout = sc.eval_R_all(tab_out, N - k, t, 0, scale)[0]
    nder = {"identity": 0, "rho_dphi": 1, "laplacian": 2}[action]
    Rin = sc.eval_R_all(tab_in, N - k, t, nder, scale)
    s = t - alpha
    # derivatives of G = (t - alpha)^p R, each divided by (t - alpha)^q
    G = []
    for d in range(nder + 1):
        acc = 0.0
        for j in range(0, min(d, p) + 1):
            acc = acc + comb(d, j) * perm(p, j) * s ** (p - j - q) * Rin[d - j]
        G.append(acc)
    rho2 = 1 - t**2
    if action == "identity":
        h = G[0]
    elif action == "rho_dphi":
        h = k * t * G[0] - rho2 * G[1]
    else:
        h = rho2 * G[2] - 2 * (k + 1) * t * G[1] - k * (k + 1) * G[0]
    out = {}
    n_idx = np.arange(size)
    for d in range(dmin, dmax + 1):
        ok = (n_idx + d >= 0) & (n_idx + d < size)
        vals = np.zeros(size)
        vals[ok] = np.einsum("ij,ij->i", Rout[n_idx[ok] + d], h[n_idx[ok]])
        out[d] = vals
    return out


def _mode_bands(N, dmin, dmax):
    """Per-block (lo, up) for a radial band [dmin, dmax] lifted to FourierMajor blocks."""
    bands = {}
    for k in range(N + 1):
        f = 1 if k == 0 else 2
        bands[k, k] = (f * dmax, -f * dmin)
    return bands


def _fill_mode(A, k, radial, dmin, dmax):
    """Write the radial band of mode k into block (k, k); kron with I_2 for k >= 1."""
    lo, up = A.block_band(k, k)
    ab = A.band_data(k, k)
    f = 1 if k == 0 else 2
    for d, vals in radial.items():
        n_idx = np.arange(len(vals))
        ok = (n_idx + d >= 0) & (n_idx + d < len(vals))
        row = up + f * d
        if not 0 <= row < ab.shape[0]:
            continue
        for i in range(f):
            ab[row, f * n_idx[ok] + i] = vals[ok]


def dtheta(alpha, N, a=0, weighted=False):
    sizes = block_sizes(N, Ordering.FOURIER_MAJOR)
    bands = {(k, k): (1, 1) for k in range(1, N + 1)}
    A = BandedBlockBanded(sizes, sizes, (0, 0), (1, 1), Ordering.FOURIER_MAJOR, bands)
    for k in range(1, N + 1):
        ab = A.band_data(k, k)
        ab[0, 1::2] = k    # output cos from input sin
        ab[2, 0::2] = -k   # output sin from input cos
    return A


def _elementary(spec):
    kind = spec.kind
    N = spec.N
    dmin, dmax = _degree_band(kind, spec.atilde)
    p = spec.a_in if spec.weighted_in else 0
    q = spec.a_out if spec.weighted_out else 0
    sizes = block_sizes(N, Ordering.FOURIER_MAJOR)
    lam, mu = SUB_BLOCK_BANDWIDTHS(kind, spec.atilde)
    A = BandedBlockBanded(sizes, sizes, (0, 0), (max(lam, 0), max(mu, 0)), Ordering.FOURIER_MAJOR,
                          _mode_bands(N, dmin, dmax))
    for k in range(N + 1):
        radial = _radial_band(spec.alpha, N, k, spec.a_in, spec.a_out, p, q, _ACTION[kind], dmin, dmax)
        _fill_mode(A, k, radial, dmin, dmax)
    return A


def assemble(spec):
    """Operator matrix for an OperatorSpec (FourierMajor, banded-block-banded)."""
    kind = spec.kind
    if kind is Kind.DTHETA:
        return dtheta(spec.alpha, spec.N, spec.a_in, spec.weighted_in)
    if kind is Kind.RHO2_LAPLACIAN:
        return rho2_laplacian(spec.alpha, spec.N)
    if kind is Kind.BIHARMONIC:
        return biharmonic(spec.alpha, spec.N)
    if kind is Kind.VARIABLE_COEFFICIENT:
        raise ValueError("use variable_coefficient(v, spec) for multiplication operators")
    return _elementary(spec)


def truncate(A, N_from, N):
    """Restrict a FourierMajor operator at degree N_from to the degree-N index set."""
    if N == N_from:
        return A
    n, k, i, fpos = index_table(N)
    # big-order position of each small-order slot
    keep = np.empty(len(fpos), dtype=np.int64)
    keep[fpos] = fourier_major_index(N_from, n, k, i)
    S = A.to_sparse()[keep][:, keep]
    pattern = A.mask_pattern()[keep][:, keep]
    sizes = block_sizes(N, Ordering.FOURIER_MAJOR)
    out = BandedBlockBanded.from_pattern(pattern, sizes, sizes, A.ordering)
    out._scatter(S, 0.0)
    return out


def rho2_laplacian(alpha, N):
    """rho^2 times the Laplace-Beltrami operator, weighted a = 1 coefficients to a = 1.

    The factors are composed at degree N + 2 and the product truncated, so the
    intermediate degree raise of the weighted factor loses nothing.
    """
    of = OperatorSpec.of
    M = N + 2
    radial = product(assemble(of(Kind.DPHI, alpha, M, a=0)), assemble(of(Kind.WPHI, alpha, M, a=1)))
    D = dtheta(alpha, M, 1, True)
    convert = product(assemble(of(Kind.CONVERT_UP, alpha, M, a=0, atilde=1)),
                      assemble(of(Kind.CONVERT_DOWN, alpha, M, a=1, atilde=1)))
    return truncate(radial + product(convert, product(D, D)), M, N)


def biharmonic_factors(alpha, N, atilde=2):
    """The two Laplacian factors at degree N + atilde, whose product truncates to the biharmonic."""
    of = OperatorSpec.of
    M = N + atilde
    return (assemble(of(Kind.LAPLACIAN, alpha, M, a=0, atilde=atilde)),
            assemble(of(Kind.WEIGHTED_LAPLACIAN, alpha, M, a=2, atilde=atilde)))


def biharmonic(alpha, N):
    """Laplacian squared, weighted a = 2 coefficients to a = 2."""
    L, LW = biharmonic_factors(alpha, N)
    return truncate(product(L, LW), N + 2, N)


# ------------------------------------------------------- variable coefficients
# relative chop for expanded coefficient functions; expansion roundoff plateaus near 1e-14
CHOP_TOL = 1e-13


def chop_coefficients(coeffs, tol=CHOP_TOL):
    """Drop trailing degrees whose block norms are below tol * max block norm."""
    norms = coeffs.degree_block_norms()
    top = norms.max() if norms.size else 0.0
    keep = np.flatnonzero(norms > tol * top) if top > 0 else np.array([0])
    n_v = int(keep.max()) if keep.size else 0
    spec = BasisSpec(coeffs.spec.alpha, coeffs.spec.a, n_v)
    dm = reorder(coeffs, Ordering.DEGREE_MAJOR).values[: spec.dim]
    return reorder(CoefficientVector(dm, Ordering.DEGREE_MAJOR, spec, coeffs.weighted),
                   Ordering.FOURIER_MAJOR)


def is_rotationally_invariant(coeffs, tol=1e-14):
    fm = reorder(coeffs, Ordering.FOURIER_MAJOR).values
    N = coeffs.spec.N
    scale = max(np.abs(fm).max(), 1e-300)
    return bool(np.all(np.abs(fm[N + 1:]) <= tol * scale))


def _coefficients_of(v, spec, degree, tol):
    if isinstance(v, CoefficientVector):
        if v.spec.alpha != spec.alpha or v.spec.a != spec.a:
            raise ValueError("coefficient function must use the operator's (alpha, a)")
        if v.weighted and v.spec.a:
            raise ValueError("coefficient function must be given in the unweighted basis")
        return v
    if degree is None:
        degree = min(spec.N, 40)
    return chop_coefficients(expand(v, BasisSpec(spec.alpha, spec.a, degree)), tol)


def _z_jacobi(alpha, a, k, size):
    tab = sc.family(alpha, a, 2 * k, size)
    off = tab.betas[: size - 1]
    return sp.diags([off, tab.alphas[:size], off], [-1, 0, 1], format="csr")


def _axisymmetric_multiplication(coeffs, spec):
    """Per-mode 1D Clenshaw in the z Jacobi matrix of each family (a, 2k)."""
    N, N_v = spec.N, coeffs.spec.N
    # v(z) = sum_n c_n R^{(a,0)}_n(z) with c_n = Y0 f_{n,0,0}
    c = np.array([coeffs.get(n, 0, 0) for n in range(N_v + 1)]) * Y0
    tab0 = sc.family(spec.alpha, spec.a, 0, N_v + 1)
    al, be = tab0.alphas, tab0.betas
    sizes = block_sizes(N, Ordering.FOURIER_MAJOR)
    bands = {(k, k): ((1 if k == 0 else 2) * N_v,) * 2 for k in range(N + 1)}
    A = BandedBlockBanded(sizes, sizes, (0, 0), (2 * N_v, 2 * N_v), Ordering.FOURIER_MAJOR, bands)
    for k in range(N + 1):
        n_k = N - k + 1
        size = n_k + N_v
        Z = _z_jacobi(spec.alpha, spec.a, k, size)
        eye = sp.identity(size, format="csr")
        b1 = sp.csr_matrix((size, size))
        b2 = sp.csr_matrix((size, size))
        # b_n = c_n + (Z - al_n) b_{n+1} / be_n - (be_n / be_{n+1}) b_{n+2};  v(Z) = b_0
        for n in range(N_v, -1, -1):
            b = c[n] * eye + (Z @ b1 - al[n] * b1) / be[n] - (be[n] / be[n + 1]) * b2
            b2, b1 = b1, b
        V = b1[:n_k, :n_k]
        if k > 0:
            V = sp.kron(V, sp.identity(2))
        A.set_block(k, k, V.toarray())
    return A


def _structural_multiplication_mask(N, N_v):
    """Pattern of multiplication by a degree-N_v polynomial: |m - n| <= N_v and |k' - k| <= N_v."""
    n, k, i, fpos = index_table(N)
    rows, cols = [], []
    index = np.full((N + 1, N + 1, 2), -1, dtype=np.int64)
    index[n, k, i] = fpos
    for dn in range(-N_v, N_v + 1):
        for dk in range(-N_v, N_v + 1):
            m, j = n + dn, k + dk
            ok = (m >= 0) & (m <= N) & (j >= 0) & (j <= m)
            for h in (0, 1):
                ok_h = ok & ~((j == 0) & (h == 1))
                rows.append(index[m[ok_h], j[ok_h], h])
                cols.append(fpos[ok_h])
    r, c = np.concatenate(rows), np.concatenate(cols)
    return sp.csr_matrix((np.ones(len(r), dtype=bool), (r, c)), shape=((N + 1) ** 2,) * 2)


def _clenshaw_multiplication(coeffs, spec):
    """Operator Clenshaw: v(X, Y, Z) with X, Y, Z the transposed Jacobi matrices at degree N + N_v."""
    N, N_v = spec.N, coeffs.spec.N
    big = BasisSpec(spec.alpha, spec.a, N + N_v)
    D = big.dim
    X, Y, Z = (jacobi_operator(big, ax)[:, :D].T.tocsr() for ax in ("x", "y", "z"))
    cm = clenshaw_matrices(coeffs.spec)
    f = reorder(coeffs, Ordering.DEGREE_MAJOR).values
    eye = sp.identity(D, format="csr")
    xi_next = None
    u_next = None
    for n in range(N_v, -1, -1):
        size = 2 * n + 1
        fn = sp.csr_matrix(f[n * n:(n + 1) ** 2, None])
        xi = sp.kron(fn, eye, format="csr")
        if n < N_v:
            u = sp.kron(cm.Dt[n].T, eye, format="csr") @ xi_next
            ux, uy, uz = u[: size * D], u[size * D: 2 * size * D], u[2 * size * D:]
            blk = sp.identity(size, format="csr")
            xi = xi + sp.kron(blk, X) @ ux + sp.kron(blk, Y) @ uy + sp.kron(blk, Z) @ uz
            xi = xi - sp.kron(cm.B[n].T, eye, format="csr") @ u
        else:
            u = None
        if n + 1 < N_v:
            xi = xi - sp.kron(cm.C[n + 1].T, eye, format="csr") @ u_next
        xi_next, u_next = xi.tocsr(), u
    V = (Y0 * xi_next)[: spec.dim, : spec.dim].tocoo()
    # DegreeMajor -> FourierMajor
    fpos = index_table(N)[3]
    V = sp.coo_matrix((V.data, (fpos[V.row], fpos[V.col])), shape=V.shape)
    sizes = block_sizes(N, Ordering.FOURIER_MAJOR)
    A = BandedBlockBanded.from_pattern(_structural_multiplication_mask(N, N_v), sizes, sizes,
                                       Ordering.FOURIER_MAJOR)
    A._scatter(V, 1e-13)
    return A


def variable_coefficient(v, spec, degree=None, tol=CHOP_TOL, fast_path=True):
    """Matrix of multiplication by v on unweighted family ``spec.a`` coefficients (FourierMajor).

    ``v`` is a CoefficientVector in that family or a vectorised callable,
    expanded to ``degree`` (default min(N, 40)) and chopped at ``tol`` relative to the largest block.
    Rotationally invariant v(z) take a per-mode 1D Clenshaw; others the
    operator Clenshaw over the Jacobi matrices.
    """
    coeffs = _coefficients_of(v, spec, degree, tol)
    if coeffs.spec.N > spec.N:
        raise DegreeError(f"coefficient degree {coeffs.spec.N} exceeds N = {spec.N}")
    if fast_path and is_rotationally_invariant(coeffs):
        return _axisymmetric_multiplication(coeffs, spec)
    return _clenshaw_multiplication(coeffs, spec)


def helmholtz_operator(alpha, N, k_wave, v, v_degree=None, fast_path=True):
    """Laplacian + k^2 v on weighted a = 1 coefficients, mapping into the a = 1 family.

    The multiplication term is composed at degree N + 1 + deg(v) and
    truncated, so it equals the exact Galerkin matrix.  With k_wave = 0 (or
    v None) this is the weighted Laplacian alone.
    """
    of = OperatorSpec.of
    L = assemble(of(Kind.WEIGHTED_LAPLACIAN_A1, alpha, N))
    if k_wave == 0 or v is None:
        return L
    coeffs = _coefficients_of(v, BasisSpec(alpha, 0, N), v_degree, CHOP_TOL)
    M = N + 1 + coeffs.spec.N
    V = variable_coefficient(coeffs, BasisSpec(alpha, 0, M), fast_path=fast_path)
    up = assemble(of(Kind.CONVERT_UP, alpha, M, a=0, atilde=1))
    down = assemble(of(Kind.CONVERT_DOWN, alpha, M, a=1, atilde=1))
    return L + truncate(product(up, product(V, down)), M, N) * (k_wave**2)


def spy_coo(A, tol=0.0):
    """(row, col, |value|) triples of the stored nonzeros, for external spy plots."""
    return A.spy_triples(tol)
