import numpy as np
import pytest
import sympy
from hypothesis import given, strategies as st

from capspectral.coeffs import BasisSpec
from capspectral.solvers import (BoundaryResolutionError, PdeProblem, ProblemKind, ThetaLift, catalog_problem,
                                 exponential_decay_rate, lift_boundary, poisson_exact_solution, poisson_rhs,
                                 quadratic_coefficient, resolved_degree, solve_problem)
from capspectral.transforms import expand

from conftest import cap_points
from oracles import laplace_beltrami_sympy

ALPHA = 0.2
X, Y, Z = sympy.symbols("x y z")


def numeric(expr):
    f = sympy.lambdify((X, Y, Z), expr, "numpy")
    return lambda x, y, z: np.broadcast_to(np.asarray(f(x, y, z), float), np.shape(x))


def sym_quadratic(centre=(0.7, 0.2)):
    x0, z0 = centre
    y0 = sympy.sqrt(1 - sympy.Float(x0) ** 2 - sympy.Float(z0) ** 2)
    return 1 - (3 * (X - x0) ** 2 + 5 * (Y - y0) ** 2 + 2 * (Z - z0) ** 2)


def test_poisson_forcing_is_laplacian_of_exact_solution(rng):
    u = (Z - ALPHA) * Y * sympy.exp(X)
    lb = numeric(laplace_beltrami_sympy(u, X, Y, Z))
    pts = cap_points(rng, 100, ALPHA)
    assert np.abs(poisson_rhs(ALPHA)(*pts.T) - lb(*pts.T)).max() < 1e-12


def test_poisson_manufactured_solution(rng):
    sol = solve_problem(catalog_problem("paper-fig3", alpha=ALPHA, N=60))
    assert sol.residual_norm < 1e-8
    assert sol.path == "decoupled"
    pts = cap_points(rng, 200, ALPHA)
    assert np.abs(sol.evaluate(pts) - poisson_exact_solution(ALPHA)(*pts.T)).max() < 1e-8
    # zero Dirichlet data is structural
    th = np.linspace(0, 2 * np.pi, 17)
    r = np.sqrt(1 - ALPHA**2)
    rim = np.column_stack([r * np.cos(th), r * np.sin(th), np.full_like(th, ALPHA)])
    assert np.abs(sol.evaluate(rim)).max() == 0.0


@pytest.mark.parametrize("alpha", [-0.6, 0.5])
def test_poisson_other_caps(alpha, rng):
    sol = solve_problem(PdeProblem(ProblemKind.POISSON, alpha, 40, poisson_rhs(alpha)))
    pts = cap_points(rng, 100, alpha)
    assert np.abs(sol.evaluate(pts) - poisson_exact_solution(alpha)(*pts.T)).max() < 1e-8


def test_zero_forcing_gives_zero_solution():
    for kind in ProblemKind:
        v = (lambda x, y, z: np.cos(z)) if kind is ProblemKind.HELMHOLTZ else None
        k = 2.0 if kind is ProblemKind.HELMHOLTZ else None
        sol = solve_problem(PdeProblem(kind, ALPHA, 10, lambda x, y, z: np.zeros(np.shape(x)), v, k))
        assert np.all(sol.coeffs.values == 0)


def test_helmholtz_at_zero_wavenumber_is_poisson():
    f = poisson_rhs(ALPHA)
    p = solve_problem(PdeProblem(ProblemKind.POISSON, ALPHA, 30, f))
    h = solve_problem(PdeProblem(ProblemKind.HELMHOLTZ, ALPHA, 30, f, quadratic_coefficient(), 0.0))
    assert np.array_equal(p.coeffs.values, h.coeffs.values)


def test_helmholtz_manufactured_solution(rng):
    k = 3.0
    u = (Z - ALPHA) * Y * sympy.exp(X)
    v = sym_quadratic()
    f = laplace_beltrami_sympy(u, X, Y, Z) + k**2 * v * u
    sol = solve_problem(PdeProblem(ProblemKind.HELMHOLTZ, ALPHA, 40, numeric(f), numeric(v), k))
    assert sol.path == "coupled"
    assert sol.residual_norm < 1e-8
    pts = cap_points(rng, 100, ALPHA)
    assert np.abs(sol.evaluate(pts) - numeric(u)(*pts.T)).max() < 1e-8


def test_helmholtz_example_residual():
    sol = solve_problem(catalog_problem("paper-fig4", alpha=ALPHA, N=40))
    assert sol.residual_norm < 1e-8
    # k = 20 oscillates on the cap; at N = 40 the tail has only begun to converge
    assert sol.block_norms[-1] < 1e-5 * sol.block_norms.max()


def test_rotationally_invariant_coefficient_decouples(rng):
    k = 2.0
    u = (Z - ALPHA) * X * sympy.exp(Y)
    f = laplace_beltrami_sympy(u, X, Y, Z) + k**2 * sympy.cos(Z) * u
    sol = solve_problem(PdeProblem(ProblemKind.HELMHOLTZ, ALPHA, 40, numeric(f), lambda x, y, z: np.cos(z), k))
    assert sol.path == "decoupled"
    pts = cap_points(rng, 100, ALPHA)
    assert np.abs(sol.evaluate(pts) - numeric(u)(*pts.T)).max() < 1e-8


def test_biharmonic_manufactured_solution(rng):
    u = (Z - ALPHA) ** 2 * Y * sympy.exp(X)
    f = laplace_beltrami_sympy(laplace_beltrami_sympy(u, X, Y, Z), X, Y, Z)
    sol = solve_problem(PdeProblem(ProblemKind.BIHARMONIC, ALPHA, 40, numeric(f)))
    assert sol.residual_norm < 1e-8
    pts = cap_points(rng, 100, ALPHA)
    assert np.abs(sol.evaluate(pts) - numeric(u)(*pts.T)).max() < 1e-8


def test_biharmonic_boundary_conditions():
    sol = solve_problem(catalog_problem("paper-fig5", alpha=ALPHA, N=60))
    assert sol.residual_norm < 1e-8
    th = np.linspace(0, 2 * np.pi, 33)

    def ring(z):
        r = np.sqrt(1 - z * z)
        return np.column_stack([r * np.cos(th), r * np.sin(th), np.full_like(th, z)])

    assert np.abs(sol.evaluate(ring(ALPHA))).max() < 1e-12
    h = 1e-6
    # derivative along the meridian, by a one-sided difference into the cap
    slope = np.abs(sol.evaluate(ring(ALPHA + h)) - sol.evaluate(ring(ALPHA))).max() / h
    assert slope < 1e-4 * np.abs(sol.evaluate(ring(0.6))).max() / 0.4


def test_lift_of_zero_data_is_zero():
    f = poisson_rhs(ALPHA)
    plain = solve_problem(PdeProblem(ProblemKind.POISSON, ALPHA, 20, f))
    lifted = solve_problem(PdeProblem(ProblemKind.POISSON, ALPHA, 20, f,
                                      boundary=lambda c, s: np.zeros(np.shape(c))))
    assert np.abs(plain.coeffs.values - lifted.coeffs.values).max() < 1e-14
    assert np.all(lifted.lift.cos_coeffs == 0) and np.all(lifted.lift.sin_coeffs == 0)


def test_theta_lift_matches_symbolic_laplacian(rng):
    lift = ThetaLift(np.array([0.5, 2.0, 0.0, 0.3]), np.array([0.0, -1.0, 0.7, 0.0]))
    rho = sympy.sqrt(X**2 + Y**2)
    c, s = X / rho, Y / rho
    c2, s2 = c * c - s * s, 2 * s * c
    c3 = c * c2 - s * s2
    expr = 0.5 + 2.0 * c - 1.0 * s + 0.7 * s2 + 0.3 * c3
    pts = cap_points(rng, 50, ALPHA)
    assert np.abs(lift(*pts.T) - numeric(expr)(*pts.T)).max() < 1e-13
    lb = numeric(laplace_beltrami_sympy(expr, X, Y, Z))
    assert np.abs(lift.surface_laplacian(*pts.T) - lb(*pts.T)).max() < 1e-10


def test_lifted_boundary_data_is_attained():
    boundary = lambda c, s: 1.0 + c - 0.5 * s * c
    problem = PdeProblem(ProblemKind.POISSON, ALPHA, 30, lambda x, y, z: np.zeros(np.shape(x)), boundary=boundary)
    reduced, lift = lift_boundary(problem)
    assert reduced.boundary is None
    sol = solve_problem(problem)
    th = np.linspace(0, 2 * np.pi, 21)
    r = np.sqrt(1 - ALPHA**2)
    rim = np.column_stack([r * np.cos(th), r * np.sin(th), np.full_like(th, ALPHA)])
    assert np.abs(sol.evaluate(rim) - boundary(np.cos(th), np.sin(th))).max() < 1e-13


def test_lift_constant_data_gives_constant_solution(rng):
    # Laplacian u = 0 with u = 3 on the rim has u = 3; the lift carries it exactly
    problem = PdeProblem(ProblemKind.POISSON, ALPHA, 15, lambda x, y, z: np.zeros(np.shape(x)),
                         boundary=lambda c, s: np.full(np.shape(c), 3.0))
    sol = solve_problem(problem)
    pts = cap_points(rng, 30, ALPHA)
    assert np.abs(sol.evaluate(pts) - 3.0).max() < 1e-12


def test_unresolved_boundary_data_rejected():
    problem = PdeProblem(ProblemKind.POISSON, ALPHA, 5, poisson_rhs(ALPHA), boundary=lambda c, s: np.cos(10 * np.arctan2(s, c)))
    with pytest.raises(BoundaryResolutionError):
        solve_problem(problem)


def test_problem_validation():
    f = poisson_rhs(ALPHA)
    with pytest.raises(ValueError):
        PdeProblem(ProblemKind.HELMHOLTZ, ALPHA, 10, f)
    with pytest.raises(ValueError):
        PdeProblem(ProblemKind.BIHARMONIC, ALPHA, 10, f, boundary=lambda c, s: c)
    with pytest.raises(ValueError):
        PdeProblem(ProblemKind.POISSON, ALPHA, -1, f)
    with pytest.raises(KeyError):
        catalog_problem("nope")


def test_coefficient_forcing_is_padded():
    c = expand(poisson_rhs(ALPHA), BasisSpec(ALPHA, 1, 40))
    a = solve_problem(PdeProblem(ProblemKind.POISSON, ALPHA, 50, c))
    b = solve_problem(PdeProblem(ProblemKind.POISSON, ALPHA, 50, poisson_rhs(ALPHA)))
    assert np.abs(a.coeffs.values - b.coeffs.values).max() < 1e-12


@given(rate=st.floats(0.05, 2.0), N=st.integers(20, 120))
def test_decay_rate_of_exact_exponential(rate, N):
    norms = np.exp(-rate * np.arange(N + 1))
    assert exponential_decay_rate(norms) == pytest.approx(rate, rel=1e-6)


def test_decay_window_stops_at_roundoff():
    n = np.arange(121)
    norms = np.maximum(np.exp(-0.85 * n), 1e-16)
    assert resolved_degree(norms) == 35
    assert exponential_decay_rate(norms) == pytest.approx(0.85, rel=1e-6)


def test_decay_rate_tracks_singularity_distance():
    rates = {}
    for eps in (0.5, 0.1):
        sol = solve_problem(catalog_problem("paper-fig3", alpha=ALPHA, N=60, eps=eps))
        rates[eps] = exponential_decay_rate(sol.block_norms)
    assert rates[0.5] > 2 * rates[0.1] > 0
