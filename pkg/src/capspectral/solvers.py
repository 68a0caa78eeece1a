"""PDE drivers on the cap z > alpha: Poisson, variable-coefficient Helmholtz and biharmonic.

Solutions are expanded in weighted bases (z - alpha)^a Q^{(a)}, a = 1 for the
second-order problems (zero Dirichlet data) and a = 2 for the biharmonic
(zero Dirichlet and Neumann data), so boundary conditions hold structurally.
"""
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy.special import erf

from .basis import evaluate
from .bbb import solve
from .coeffs import BasisSpec, CoefficientVector, Ordering, reorder
from .operators import assemble, biharmonic, helmholtz_operator, Kind, OperatorSpec
from .transforms import expand

__all__ = [
    "ProblemKind", "PdeProblem", "PdeSolution", "BoundaryResolutionError", "ThetaLift",
    "solve_problem", "solve_poisson", "solve_helmholtz", "solve_biharmonic", "lift_boundary",
    "exponential_decay_rate", "resolved_degree", "RHS_CATALOG", "RHS_NAMES", "COEFFICIENT_NAMES", "catalog_problem", "rhs_function",
    "coefficient_function", "poisson_rhs", "poisson_exact_solution", "distance_rhs", "gaussian_rhs",
    "erf_rhs", "helmholtz_rhs", "helmholtz_coefficient", "quadratic_coefficient",
]


class BoundaryResolutionError(ValueError):
    """Boundary data not resolved to degree N in theta."""


class ProblemKind(str, Enum):
    POISSON = "Poisson"
    HELMHOLTZ = "Helmholtz"
    BIHARMONIC = "Biharmonic"


@dataclass(frozen=True)
class PdeProblem:
    kind: ProblemKind
    alpha: float
    N: int
    f: Callable
    v: Optional[Callable] = None
    k_wave: Optional[float] = None
    boundary: Optional[Callable] = None
    v_degree: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ProblemKind(self.kind))
        if self.kind is ProblemKind.HELMHOLTZ and (self.v is None or self.k_wave is None):
            raise ValueError("Helmholtz problems need both v and k_wave")
        if self.kind is ProblemKind.BIHARMONIC and self.boundary is not None:
            raise ValueError("biharmonic problems take zero Dirichlet and Neumann data only")
        if self.N < 0:
            raise ValueError("N must be non-negative")


@dataclass(frozen=True, eq=False)
class ThetaLift:
    """The theta-only extension c(x / rho, y / rho) of boundary data, via its Fourier coefficients."""
    cos_coeffs: np.ndarray  # n = 0..N, index 0 is the mean
    sin_coeffs: np.ndarray  # n = 0..N, index 0 unused

    def _series(self, x, y, weights=None):
        theta = np.arctan2(y, x)
        n = np.arange(len(self.cos_coeffs))
        w = np.ones(len(n)) if weights is None else weights
        return (np.cos(np.outer(theta, n)) @ (w * self.cos_coeffs)
                + np.sin(np.outer(theta, n)) @ (w * self.sin_coeffs))

    def __call__(self, x, y, z):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        return self._series(x.ravel(), y.ravel()).reshape(x.shape)

    def surface_laplacian(self, x, y, z):
        """Laplace-Beltrami of the extension: -(1 / rho^2) sum n^2 (c_n cos n theta + s_n sin n theta)."""
        x, y, z = np.broadcast_arrays(*(np.asarray(v, float) for v in (x, y, z)))
        n = np.arange(len(self.cos_coeffs))
        vals = -self._series(x.ravel(), y.ravel(), n.astype(float) ** 2) / (1 - z.ravel() ** 2)
        return vals.reshape(x.shape)


@dataclass(eq=False)
class PdeSolution:
    coeffs: CoefficientVector
    residual_norm: float
    block_norms: np.ndarray
    rhs: CoefficientVector
    path: str = "decoupled"
    timings: dict = field(default_factory=dict)
    lift: Optional[ThetaLift] = None
    operator: object = None

    def evaluate(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = evaluate(self.coeffs, pts)
        if self.lift is not None:
            out = out + self.lift(*pts.T)
        return out


def lift_boundary(problem, tol=1e-10):
    """Equivalent zero-boundary problem for boundary data c(x, y) and the lift that undoes it.

    Returns (problem', lift) with f' = f - k^2 v c - Laplacian(c), where c is
    extended off the boundary as a function of theta only.
    """
    if problem.boundary is None:
        return problem, None
    if problem.kind is ProblemKind.BIHARMONIC:
        raise ValueError("lifting applies to second-order problems")
    if isinstance(problem.f, CoefficientVector):
        raise ValueError("boundary lifting needs a callable right-hand side")
    N = problem.N
    M = 4 * (N + 1)
    theta = 2 * np.pi * np.arange(M) / M
    vals = np.asarray(problem.boundary(np.cos(theta), np.sin(theta)), dtype=float) * np.ones(M)
    F = np.fft.rfft(vals) / M
    cos_c = 2 * F.real
    sin_c = -2 * F.imag
    cos_c[0] /= 2
    scale = max(np.abs(cos_c).max(), np.abs(sin_c).max(), 1.0)
    tail = max(np.abs(cos_c[N + 1:]).max(initial=0.0), np.abs(sin_c[N + 1:]).max(initial=0.0))
    if tail > tol * scale:
        raise BoundaryResolutionError(f"boundary data has theta modes above N = {N} of size {tail:.2e}")
    lift = ThetaLift(cos_c[: N + 1].copy(), sin_c[: N + 1].copy())
    f, v = problem.f, problem.v
    k2 = 0.0 if problem.k_wave is None else problem.k_wave ** 2

    def g(x, y, z):
        out = f(x, y, z) - lift.surface_laplacian(x, y, z)
        if k2 and v is not None:
            out = out - k2 * v(x, y, z) * lift(x, y, z)
        return out

    from dataclasses import replace
    return replace(problem, f=g, boundary=None), lift


def _finish(A, rhs, a, path="auto"):
    t0 = time.perf_counter()
    result = solve(A, rhs, path)
    elapsed = time.perf_counter() - t0
    spec = rhs.spec
    u = CoefficientVector(result.solution, rhs.ordering, BasisSpec(spec.alpha, a, spec.N), True)
    return u, result, elapsed


def _rhs_coefficients(f, spec):
    """Expand a callable, or pad/truncate given unweighted coefficients to ``spec``."""
    if not isinstance(f, CoefficientVector):
        return expand(f, spec)
    if f.weighted or f.spec.a != spec.a or f.spec.alpha != spec.alpha:
        raise ValueError(f"right-hand side coefficients must be unweighted with alpha = {spec.alpha}, a = {spec.a}")
    dm = reorder(f, Ordering.DEGREE_MAJOR).values
    out = np.zeros(spec.dim)
    m = min(len(dm), spec.dim)
    out[:m] = dm[:m]
    return reorder(CoefficientVector(out, Ordering.DEGREE_MAJOR, spec), Ordering.FOURIER_MAJOR)


def _run(problem, A_builder, a_rhs, a_sol, path="auto"):
    problem, lift = lift_boundary(problem)
    spec = BasisSpec(problem.alpha, a_rhs, problem.N)
    t0 = time.perf_counter()
    rhs = _rhs_coefficients(problem.f, spec)
    t1 = time.perf_counter()
    A = A_builder(problem)
    t2 = time.perf_counter()
    u, result, t_solve = _finish(A, rhs, a_sol, path)
    timings = {"expand": t1 - t0, "assemble": t2 - t1, "solve": t_solve}
    return PdeSolution(u, result.residual, u.degree_block_norms(), rhs, result.path, timings, lift, A)


def solve_poisson(problem, path="auto"):
    """Laplacian u = f with u = 0 (or lifted data) on z = alpha."""
    if problem.kind is not ProblemKind.POISSON:
        raise ValueError("solve_poisson needs a Poisson problem")
    return _run(problem, lambda p: assemble(OperatorSpec.of(Kind.WEIGHTED_LAPLACIAN_A1, p.alpha, p.N)),
                1, 1, path)


def solve_helmholtz(problem, path="auto"):
    """(Laplacian + k^2 v) u = f; mode-decoupled solve when v depends on z only."""
    if problem.kind is not ProblemKind.HELMHOLTZ:
        raise ValueError("solve_helmholtz needs a Helmholtz problem")
    return _run(problem,
                lambda p: helmholtz_operator(p.alpha, p.N, p.k_wave, p.v, p.v_degree),
                1, 1, path)


def solve_biharmonic(problem, path="auto"):
    """Laplacian^2 u = f with u and its normal derivative zero on z = alpha."""
    if problem.kind is not ProblemKind.BIHARMONIC:
        raise ValueError("solve_biharmonic needs a biharmonic problem")
    return _run(problem, lambda p: biharmonic(p.alpha, p.N), 2, 2, path)


def solve_problem(problem, path="auto"):
    return {
        ProblemKind.POISSON: solve_poisson,
        ProblemKind.HELMHOLTZ: solve_helmholtz,
        ProblemKind.BIHARMONIC: solve_biharmonic,
    }[problem.kind](problem, path)


def resolved_degree(block_norms, floor=1e-13):
    """Last degree whose block norm exceeds ``floor`` times the largest; beyond it lies roundoff."""
    norms = np.asarray(block_norms, dtype=float)
    above = np.flatnonzero(norms > floor * norms.max())
    return int(above[-1]) if above.size else 0


def exponential_decay_rate(block_norms, lo=None, hi=None, floor=1e-13):
    """Least-squares rate r in |block_n| ~ C exp(-r n) over degrees [lo, hi] (default [N/4, 3N/4]).

    The window is clipped to the resolved range: hi drops to resolved_degree
    when the series reaches roundoff earlier, and lo to at most hi / 4.
    """
    norms = np.asarray(block_norms, dtype=float)
    N = len(norms) - 1
    hi = (3 * N) // 4 if hi is None else hi
    hi = min(hi, resolved_degree(norms, floor))
    lo = N // 4 if lo is None else lo
    lo = min(lo, hi // 4)
    n = np.arange(lo, hi + 1)
    vals = norms[lo:hi + 1]
    ok = vals > 0
    if ok.sum() < 2:
        raise ValueError("fewer than two resolved block norms to fit a rate")
    slope = np.polyfit(n[ok], np.log(vals[ok]), 1)[0]
    return float(-slope)


# ------------------------------------------------------------ example data
def poisson_rhs(alpha):
    def f(x, y, z):
        return -2 * np.exp(x) * y * z * (2 + x) + (z - alpha) * np.exp(x) * (y**3 + z**2 * y - 4 * x * y - 2 * y)
    return f


def poisson_exact_solution(alpha):
    """u = (z - alpha) y e^x, whose Laplace-Beltrami is poisson_rhs(alpha)."""
    return lambda x, y, z: (z - alpha) * y * np.exp(x)


def distance_rhs(eps):
    """Distance to the point (eps + 1/sqrt(3)) (1, 1, 1), just off the sphere for small eps."""
    c = eps + 1 / np.sqrt(3)
    return lambda x, y, z: np.sqrt((x - c) ** 2 + (y - c) ** 2 + (z - c) ** 2)


DEFAULT_CENTRE = (0.7, 0.2)


def _centre_point(centre):
    x0, z0 = centre
    r2 = 1 - x0**2 - z0**2
    if r2 < 0:
        raise ValueError(f"centre (x0, z0) = {centre} is not on the sphere")
    return x0, float(np.sqrt(r2)), z0


def quadratic_coefficient(centre=DEFAULT_CENTRE):
    """v = 1 - (3 (x - x0)^2 + 5 (y - y0)^2 + 2 (z - z0)^2) with y0 = sqrt(1 - x0^2 - z0^2)."""
    x0, y0, z0 = _centre_point(centre)
    return lambda x, y, z: 1 - (3 * (x - x0) ** 2 + 5 * (y - y0) ** 2 + 2 * (z - z0) ** 2)


helmholtz_coefficient = quadratic_coefficient()


def helmholtz_rhs(alpha):
    return lambda x, y, z: y * np.exp(x) * (z - alpha)


def erf_rhs(x, y, z):
    return (1 + erf(5 * (1 - 10 * ((x - 0.5) ** 2 + y**2)))) * (1 - z**2)


def gaussian_rhs(eps, centre=DEFAULT_CENTRE):
    x0, y0, z0 = _centre_point(centre)
    return lambda x, y, z: np.exp(-eps * ((x - x0) ** 2 + (y - y0) ** 2 + (z - z0) ** 2))


def _ones(x, y, z):
    return np.ones(np.shape(x))


def _cos_z(x, y, z):
    return np.cos(z)


RHS_NAMES = ("paper-fig3", "paper-fig4", "paper-fig5", "one")
COEFFICIENT_NAMES = ("paper-fig4", "cos-z", "one")
RHS_CATALOG = {
    "paper-fig3": ProblemKind.POISSON,
    "paper-fig4": ProblemKind.HELMHOLTZ,
    "paper-fig5": ProblemKind.BIHARMONIC,
    "complexity": ProblemKind.HELMHOLTZ,
}


def rhs_function(name, alpha, eps=None, centre=DEFAULT_CENTRE):
    """Built-in forcing terms.

    paper-fig3: the manufactured Poisson forcing for u = (z - alpha) y e^x, or
    the distance family when ``eps`` is given.  paper-fig4: y e^x (z - alpha).
    paper-fig5: the erf forcing, or the Gaussian family at ``centre`` when
    ``eps`` is given.  one: f = 1.
    """
    if name == "paper-fig3":
        return poisson_rhs(alpha) if eps is None else distance_rhs(eps)
    if name == "paper-fig4":
        return helmholtz_rhs(alpha)
    if name == "paper-fig5":
        return erf_rhs if eps is None else gaussian_rhs(eps, centre)
    if name == "one":
        return _ones
    raise KeyError(f"unknown right-hand side {name!r}; choose from {list(RHS_NAMES)}")


def coefficient_function(name, centre=DEFAULT_CENTRE):
    if name == "paper-fig4":
        return quadratic_coefficient(centre)
    if name == "cos-z":
        return _cos_z
    if name == "one":
        return _ones
    raise KeyError(f"unknown coefficient {name!r}; choose from {list(COEFFICIENT_NAMES)}")


def catalog_problem(name, alpha=0.2, N=60, k_wave=None, eps=None, centre=DEFAULT_CENTRE):
    """Built-in example problems keyed like RHS_CATALOG.

    paper-fig4 defaults to k = 20 (with ``eps`` set, f = 1 instead); complexity
    is Helmholtz with v = cos z, k = 1 and the paper-fig3 forcing.
    """
    if name not in RHS_CATALOG:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(RHS_CATALOG)}")
    kind = RHS_CATALOG[name]
    if name == "complexity":
        k = 1.0 if k_wave is None else k_wave
        return PdeProblem(kind, alpha, N, poisson_rhs(alpha), _cos_z, k)
    if name == "paper-fig4":
        k = 20.0 if k_wave is None else k_wave
        f = helmholtz_rhs(alpha) if eps is None else _ones
        return PdeProblem(kind, alpha, N, f, quadratic_coefficient(centre), k)
    return PdeProblem(kind, alpha, N, rhs_function(name, alpha, eps, centre))
