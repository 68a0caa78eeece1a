"""Solve a catalog problem and sample the solution on a (z, theta) grid for plotting."""
import argparse
from pathlib import Path

import numpy as np

from capspectral.cli import write_csv
from capspectral.solvers import RHS_CATALOG, catalog_problem, solve_problem


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("problem", choices=sorted(RHS_CATALOG))
    ap.add_argument("--alpha", type=float, default=0.2)
    ap.add_argument("--N", type=int, default=60)
    ap.add_argument("--k", type=float, default=None)
    ap.add_argument("--eps", type=float, default=None)
    ap.add_argument("--nz", type=int, default=40)
    ap.add_argument("--ntheta", type=int, default=80)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()
    sol = solve_problem(catalog_problem(args.problem, args.alpha, args.N, args.k, args.eps))
    z = np.linspace(args.alpha, 1, args.nz)
    theta = np.linspace(0, 2 * np.pi, args.ntheta, endpoint=False)
    Z, T = np.meshgrid(z, theta, indexing="ij")
    rho = np.sqrt(1 - Z**2)
    pts = np.column_stack([(rho * np.cos(T)).ravel(), (rho * np.sin(T)).ravel(), Z.ravel()])
    u = sol.evaluate(pts)
    out = Path(args.out or f"results/{args.problem}-N{args.N}-grid.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(out, ["x", "y", "z", "u"], np.column_stack([pts, u]))
    print(f"residual {sol.residual_norm:.2e}, max |u| {np.abs(u).max():.4e} -> {out}")


if __name__ == "__main__":
    main()
