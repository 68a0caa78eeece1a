"""Command-line front end: solve, spy, bench, expand, eval.

Data files are deterministic: CSVs use 17 significant digits and coefficient
JSON stores floats by their shortest round-trip repr.  Timings only go to
stdout and to the bench CSV.
"""
import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import semiclassical as sc
from .basis import CapPointError, evaluate
from .bbb import NotDecoupledError, SingularSystemError
from .coeffs import BasisSpec, CoefficientVector, Ordering
from .operators import (Kind, OperatorSpec, SUB_BLOCK_BANDWIDTHS, assemble, biharmonic, dtheta,
                        rho2_laplacian)
from .solvers import (COEFFICIENT_NAMES, DEFAULT_CENTRE, RHS_NAMES, BoundaryResolutionError,
                      PdeProblem, ProblemKind, catalog_problem, coefficient_function, poisson_exact_solution,
                      rhs_function, solve_problem)
from .transforms import expand

EXIT_INPUT = 3
EXIT_SOLVER = 4

SPY_KINDS = {
    # name: (kind, default a, weighted input)
    "dtheta": (Kind.DTHETA, 0, False),
    "dphi": (Kind.DPHI, 0, False),
    "wphi": (Kind.WPHI, 1, True),
    "laplacian": (Kind.LAPLACIAN, 0, False),
    "laplacian-w": (Kind.WEIGHTED_LAPLACIAN, 2, True),
    "laplacian-w1": (Kind.WEIGHTED_LAPLACIAN_A1, 1, True),
    "convert-up": (Kind.CONVERT_UP, 0, False),
    "convert-down": (Kind.CONVERT_DOWN, None, True),
    "rho2-laplacian": (Kind.RHO2_LAPLACIAN, 1, True),
    "biharmonic": (Kind.BIHARMONIC, 2, True),
}

EXPAND_FUNCTIONS = {
    "one": lambda alpha: (lambda x, y, z: np.ones(np.shape(x))),
    "z": lambda alpha: (lambda x, y, z: np.asarray(z, float)),
    "exyz": lambda alpha: (lambda x, y, z: np.exp(x) * y * z),
    "cos-z": lambda alpha: (lambda x, y, z: np.cos(z)),
    "paper-fig3": lambda alpha: rhs_function("paper-fig3", alpha),
    "paper-fig3-solution": lambda alpha: poisson_exact_solution(alpha),
    "paper-fig4": lambda alpha: rhs_function("paper-fig4", alpha),
    "paper-fig4-v": lambda alpha: coefficient_function("paper-fig4"),
    "paper-fig5": lambda alpha: rhs_function("paper-fig5", alpha),
}


class InputError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    alpha: float = 0.2
    a: int = None  # None: the command's default family
    N: int = 20
    problem: str = None
    rhs: str = None
    k_wave: float = None
    coefficient: str = "paper-fig4"
    centre: tuple = DEFAULT_CENTRE
    eps: float = None
    operator: str = None
    atilde: int = 2
    function: str = None
    N_values: list = field(default_factory=list)
    repeat: int = 1
    coeff_file: str = None
    points_file: str = None
    out: str = None
    fmt: str = "csv"

    def validate(self):
        if not -1 < self.alpha < 1:
            raise InputError(f"--alpha must lie in (-1, 1), got {self.alpha}")
        if self.N < 0:
            raise InputError("--N must be non-negative")
        if self.a is not None and self.a < 0:
            raise InputError("--a must be non-negative")
        if self.command == "solve":
            if self.problem == "helmholtz" and self.k_wave is None:
                self.k_wave = 20.0
            if self.problem != "helmholtz" and self.k_wave not in (None, 0):
                raise InputError("--k applies to helmholtz only")
            if self.rhs is None:
                raise InputError("--rhs is required")
        if self.command == "bench":
            if not self.N_values or min(self.N_values) < 1:
                raise InputError("--N needs one or more positive degrees")
            if self.repeat < 1:
                raise InputError("--repeat must be positive")
        if self.command == "spy" and self.atilde < 1:
            raise InputError("--atilde must be positive")
        return self


# ------------------------------------------------------------------ file formats
def coefficients_to_json(coeffs):
    payload = {
        "alpha": float(coeffs.spec.alpha),
        "a": int(coeffs.spec.a),
        "N": int(coeffs.spec.N),
        "ordering": coeffs.ordering.value,
        "weighted": bool(coeffs.weighted),
        "values": [float(v) for v in coeffs.values],
    }
    return json.dumps(payload, indent=1) + "\n"


def coefficients_from_json(text):
    try:
        d = json.loads(text)
        spec = BasisSpec(float(d["alpha"]), int(d["a"]), int(d["N"]))
        return CoefficientVector(np.array(d["values"], dtype=float), Ordering(d["ordering"]), spec,
                                 bool(d.get("weighted", False)))
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as e:
        raise InputError(f"malformed coefficient file: {e}") from None


def _fmt(v):
    return format(float(v), ".17g")


def write_csv(path, header, rows):
    lines = [",".join(header)]
    lines += [",".join(c if isinstance(c, str) else (str(c) if isinstance(c, (int, np.integer)) else _fmt(c))
                       for c in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def read_points(path, alpha, tol=1e-10):
    """Rows of x,y,z (optional header); rejects rows off the cap, naming the 1-based line."""
    pts = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        try:
            x, y, z = (float(p) for p in parts)
        except ValueError:
            if not pts and lineno == 1:
                continue  # header
            raise InputError(f"{path}: row {lineno}: expected three numbers x,y,z") from None
        if abs(x * x + y * y + z * z - 1) > tol:
            raise InputError(f"{path}: row {lineno}: point ({x}, {y}, {z}) is not on the unit sphere")
        if z < alpha - tol:
            raise InputError(f"{path}: row {lineno}: point ({x}, {y}, {z}) lies below the cap z >= {alpha}")
        pts.append((x, y, z))
    return np.array(pts, dtype=float).reshape(-1, 3)


# ------------------------------------------------------------------ commands
def _out_dir(cfg, default):
    out = Path(cfg.out or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_solve(cfg):
    kind = ProblemKind(cfg.problem.capitalize())
    if Path(cfg.rhs).suffix == ".json":
        f = coefficients_from_json(Path(cfg.rhs).read_text())
    else:
        try:
            f = rhs_function(cfg.rhs, cfg.alpha, cfg.eps, cfg.centre)
        except KeyError as e:
            raise InputError(str(e.args[0])) from None
    v = coefficient_function(cfg.coefficient, cfg.centre) if kind is ProblemKind.HELMHOLTZ else None
    problem = PdeProblem(kind, cfg.alpha, cfg.N, f, v, cfg.k_wave)
    sol = solve_problem(problem)
    out = _out_dir(cfg, f"{cfg.problem}-N{cfg.N}")
    (out / "coefficients.json").write_text(coefficients_to_json(sol.coeffs))
    write_csv(out / "decay.csv", ["degree", "norm"], enumerate(sol.block_norms))
    print(f"residual {sol.residual_norm:.3e}")
    print(f"path {sol.path}")
    print("timings " + " ".join(f"{k}={v:.4f}s" for k, v in sol.timings.items()))
    print(f"wrote {out / 'coefficients.json'} and {out / 'decay.csv'}")
    return 0


def spy_operator(name, alpha, N, a=None, atilde=2):
    if name not in SPY_KINDS:
        raise InputError(f"unknown operator {name!r}; choose from {sorted(SPY_KINDS)}")
    kind, a_default, weighted = SPY_KINDS[name]
    if a is None:
        a = atilde if a_default is None else a_default
    if kind is Kind.DTHETA:
        return dtheta(alpha, N, a), (1, 1)
    if kind is Kind.RHO2_LAPLACIAN:
        return rho2_laplacian(alpha, N), None
    if kind is Kind.BIHARMONIC:
        return biharmonic(alpha, N), None
    try:
        spec = OperatorSpec.of(kind, alpha, N, a=a, atilde=atilde, weighted=weighted)
    except sc.ParameterError as e:
        raise InputError(str(e)) from None
    return assemble(spec), SUB_BLOCK_BANDWIDTHS(kind, atilde)


def cmd_spy(cfg):
    A, claimed = spy_operator(cfg.operator, cfg.alpha, cfg.N, cfg.a, cfg.atilde)
    (L, U), (lam, mu) = A.certified_bandwidths()
    print(f"block bandwidths ({L}, {U})")
    print(f"sub-block bandwidths ({lam}, {mu})")
    if claimed is not None:
        print(f"expected sub-block bandwidths {tuple(claimed)}")
    r, c, v = A.spy_triples(1e-13)
    out = Path(cfg.out or f"spy-{cfg.operator}-N{cfg.N}.csv")
    write_csv(out, ["row", "col", "absval"], zip(r.tolist(), c.tolist(), v))
    print(f"wrote {len(v)} entries to {out}")
    return 0


def bench_times(N_values, alpha=0.2, repeat=1):
    """Best-of-``repeat`` build+solve seconds for the rotationally invariant Helmholtz problem."""
    times = []
    for N in N_values:
        best = np.inf
        for _ in range(repeat):
            problem = catalog_problem("complexity", alpha=alpha, N=N)
            t0 = time.perf_counter()
            solve_problem(problem)
            best = min(best, time.perf_counter() - t0)
        times.append(best)
    return np.array(times)


def loglog_slope(N_values, times):
    if len(N_values) < 2:
        return None
    return float(np.polyfit(np.log(N_values), np.log(times), 1)[0])


def cmd_bench(cfg):
    Ns = sorted(cfg.N_values)
    times = bench_times(Ns, cfg.alpha, cfg.repeat)
    for N, t in zip(Ns, times):
        print(f"N={N} seconds={t:.4f}")
    slope = loglog_slope(Ns, times)
    if slope is not None:
        print(f"slope {slope:.3f}")
    out = Path(cfg.out or "bench.csv")
    write_csv(out, ["N", "seconds"], zip(Ns, times))
    return 0


def cmd_expand(cfg):
    if cfg.function not in EXPAND_FUNCTIONS:
        raise InputError(f"unknown function {cfg.function!r}; choose from {sorted(EXPAND_FUNCTIONS)}")
    coeffs = expand(EXPAND_FUNCTIONS[cfg.function](cfg.alpha), BasisSpec(cfg.alpha, cfg.a or 0, cfg.N))
    text = coefficients_to_json(coeffs)
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_eval(cfg):
    coeffs = coefficients_from_json(Path(cfg.coeff_file).read_text())
    pts = read_points(cfg.points_file, coeffs.spec.alpha)
    vals = evaluate(coeffs, pts) if len(pts) else np.zeros(0)
    rows = [(*p, v) for p, v in zip(pts, vals)]
    if cfg.fmt == "json":
        text = json.dumps({"points": pts.tolist(), "values": [float(v) for v in vals]}, indent=1) + "\n"
    else:
        text = "\n".join(["x,y,z,value"] + [",".join(_fmt(c) for c in r) for r in rows]) + "\n" if rows else ""
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


# ------------------------------------------------------------------ parsing
def build_parser():
    parser = argparse.ArgumentParser(prog="capspectral", description="Sparse spectral PDE solves on a spherical cap.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, N=20):
        p.add_argument("--alpha", type=float, default=0.2, help="cap boundary height, -1 < alpha < 1")
        p.add_argument("--N", type=int, default=N, help="polynomial degree")

    p = sub.add_parser("solve", help="solve a built-in PDE and write coefficients and decay table")
    p.add_argument("problem", choices=["poisson", "helmholtz", "biharmonic"])
    common(p, 60)
    p.add_argument("--rhs", default=None, help=f"one of {', '.join(RHS_NAMES)} or a coefficient .json file")
    p.add_argument("--k", dest="k_wave", type=float, default=None, help="Helmholtz wavenumber (default 20)")
    p.add_argument("--v", dest="coefficient", default="paper-fig4", choices=COEFFICIENT_NAMES,
                   help="Helmholtz coefficient function")
    p.add_argument("--centre", type=float, nargs=2, default=DEFAULT_CENTRE, metavar=("X0", "Z0"))
    p.add_argument("--eps", type=float, default=None, help="select the epsilon family of the right-hand side")
    p.add_argument("--out", default=None, help="output directory")

    p = sub.add_parser("spy", help="write (row, col, |value|) triples of an operator")
    p.add_argument("operator", help=", ".join(sorted(SPY_KINDS)))
    common(p)
    p.add_argument("--a", type=int, default=None)
    p.add_argument("--atilde", type=int, default=2)
    p.add_argument("--out", default=None)

    p = sub.add_parser("bench", help="time the rotationally invariant Helmholtz build and solve")
    p.add_argument("--N", dest="N_values", type=int, nargs="+", default=[50, 100, 200])
    p.add_argument("--alpha", type=float, default=0.2)
    p.add_argument("--repeat", type=int, default=1)
    p.add_argument("--out", default=None)

    p = sub.add_parser("expand", help="expand a built-in function")
    p.add_argument("function", help=", ".join(sorted(EXPAND_FUNCTIONS)))
    common(p)
    p.add_argument("--a", type=int, default=None, help="basis family (default 0)")
    p.add_argument("--out", default=None)

    p = sub.add_parser("eval", help="evaluate a coefficient file at points from a CSV")
    p.add_argument("coeff_file")
    p.add_argument("points_file")
    p.add_argument("--format", dest="fmt", choices=["csv", "json"], default="csv")
    p.add_argument("--out", default=None)
    return parser


def config_from_args(args):
    d = {k: v for k, v in vars(args).items() if v is not None and k in RunConfig.__dataclass_fields__}
    if "centre" in d:
        d["centre"] = tuple(d["centre"])
    return RunConfig(**d).validate()


COMMANDS = {"solve": cmd_solve, "spy": cmd_spy, "bench": cmd_bench, "expand": cmd_expand, "eval": cmd_eval}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        return COMMANDS[cfg.command](cfg)
    except (InputError, CapPointError, BoundaryResolutionError, sc.ParameterError, FileNotFoundError) as e:
        parser.print_usage(sys.stderr)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (SingularSystemError, NotDecoupledError, sc.AccuracyLossError, sc.TableExtentError) as e:
        print(f"solver error: {e}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
