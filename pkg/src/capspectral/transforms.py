"""Cap quadrature and expansion of functions in the cap basis.

The rule pairs M1 Gauss nodes in z for the weight (z - alpha)^a with M2
Chebyshev-Gauss angles on the upper half circle; every node also implies its
antipode (-x, -y, z), so each z ring carries 2 M2 equispaced angles.
"""
from dataclasses import dataclass

import numpy as np

from . import semiclassical as sc
from .coeffs import CoefficientVector, Ordering, fourier_block_start
from .harmonics import Y0

__all__ = ["CapQuadrature", "cap_quadrature", "expansion_quadrature", "integrate",
           "expand", "expand_values", "theta_harmonics"]


@dataclass(frozen=True, eq=False)
class CapQuadrature:
    """Nodes (M1 * M2, 3) with index l + j * M2; each implies the antipode (-x, -y, z)."""
    alpha: float
    a: int
    t: np.ndarray
    t_weights: np.ndarray
    s: np.ndarray
    s_weights: np.ndarray
    antipodal: bool = True

    @property
    def M1(self):
        return len(self.t)

    @property
    def M2(self):
        return len(self.s)

    @property
    def nodes(self):
        rho = np.sqrt(1 - self.t**2)
        x = np.outer(rho, self.s).ravel()
        y = np.outer(rho, np.sqrt(1 - self.s**2)).ravel()
        z = np.repeat(self.t, self.M2)
        return np.column_stack([x, y, z])

    @property
    def antipodes(self):
        p = self.nodes
        p[:, :2] *= -1
        return p

    @property
    def weights(self):
        return np.outer(self.t_weights, self.s_weights).ravel()

    @property
    def angles(self):
        """The 2 M2 ring angles: the M2 node angles followed by their antipodes."""
        th = np.arccos(self.s)
        return np.concatenate([th, th + np.pi])


def cap_quadrature(spec, degree, n_theta=None):
    """Rule integrating (z - alpha)^a times polynomials of total degree <= ``degree`` exactly.

    M1 = ceil((degree + 1) / 2) and M2 = degree + 1 unless ``n_theta`` overrides M2.
    """
    if degree < 0:
        raise ValueError("degree must be non-negative")
    M1 = (degree + 2) // 2
    M2 = degree + 1 if n_theta is None else int(n_theta)
    rule = sc.gauss_rule(sc.WeightParams(spec.alpha, spec.a, 0), M1)
    l = np.arange(1, M2 + 1)
    s = np.cos((2 * l - 1) * np.pi / (2 * M2))
    return CapQuadrature(float(spec.alpha), int(spec.a), rule.nodes, rule.weights, s,
                         np.full(M2, np.pi / M2))


def expansion_quadrature(spec):
    """Rule exact for products of two degree-N polynomials: M1 = N + 1 rings of 2(N + 1) angles."""
    return cap_quadrature(spec, 2 * spec.N, n_theta=spec.N + 1)


def integrate(quad, f):
    """Sum over nodes and antipodes of w * f; ``f`` is a vectorised callable f(x, y, z)."""
    p, q = quad.nodes, quad.antipodes
    vals = np.asarray(f(*p.T), dtype=float) + np.asarray(f(*q.T), dtype=float)
    return float(np.dot(quad.weights, vals))


def theta_harmonics(angles, k_max):
    """Columns Y_{0,0}, Y_{1,0}, Y_{1,1}, ..., Y_{k_max,1} at the given angles."""
    k = np.arange(1, k_max + 1)
    out = np.empty((len(angles), 2 * k_max + 1))
    out[:, 0] = Y0
    out[:, 1::2] = np.cos(np.outer(angles, k))
    out[:, 2::2] = np.sin(np.outer(angles, k))
    return out


def expand_values(values, antipodal_values, spec, quad=None):
    """Coefficients (FourierMajor) from samples at the nodes and their antipodes.

    Sum-factorised: a trigonometric transform on every z ring, then a weighted
    sum over rings against R^{(a,2k)} rho^k for each mode k.
    """
    N = spec.N
    quad = expansion_quadrature(spec) if quad is None else quad
    M1, M2 = quad.M1, quad.M2
    vals = np.concatenate([np.asarray(values, float).reshape(M1, M2),
                           np.asarray(antipodal_values, float).reshape(M1, M2)], axis=1)
    # ring transforms: F[j, c] = sum_l (pi / M2) f(theta_l) Y_c(theta_l)
    F = vals @ theta_harmonics(quad.angles, N) * (np.pi / M2)
    t, logw = quad.t, np.log(quad.t_weights)
    log_rho = 0.5 * np.log1p(-t**2)
    out = np.empty(spec.dim)
    for k in range(N + 1):
        tab = sc.family(spec.alpha, spec.a, 2 * k, N - k)
        # w_j rho_j^k R_n(t_j) / (pi omega_k), assembled in log space against underflow
        scale = np.exp(logw + k * log_rho - tab.log_omega - np.log(np.pi))
        R = sc.eval_R_all(tab, N - k, t, 0, scale)[0]
        start = int(fourier_block_start(N, k))
        if k == 0:
            out[start:start + N + 1] = R @ F[:, 0]
        else:
            block = R @ F[:, 2 * k - 1:2 * k + 1]
            out[start:start + 2 * (N - k + 1)] = block.ravel()
    return CoefficientVector(out, Ordering.FOURIER_MAJOR, spec, False)


def expand(f, spec, quad=None):
    """Coefficients of a vectorised callable f(x, y, z) in the unweighted basis, FourierMajor."""
    quad = expansion_quadrature(spec) if quad is None else quad
    p, q = quad.nodes, quad.antipodes
    fp = np.broadcast_to(np.asarray(f(*p.T), dtype=float), (len(p),))
    fq = np.broadcast_to(np.asarray(f(*q.T), dtype=float), (len(q),))
    return expand_values(fp, fq, spec, quad)
