"""Spy data (row, col, |value|) for every operator at one degree, plus multiplication by z x y^2."""
import argparse
from pathlib import Path

import numpy as np

from capspectral.cli import SPY_KINDS, spy_operator, write_csv
from capspectral.coeffs import BasisSpec
from capspectral.operators import variable_coefficient


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=20)
    ap.add_argument("--alpha", type=float, default=0.2)
    ap.add_argument("--out", default="results/spy")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mats = {name: spy_operator(name, args.alpha, args.N)[0] for name in SPY_KINDS}
    mats["multiply-zxy2"] = variable_coefficient(lambda x, y, z: z * x * y**2,
                                                 BasisSpec(args.alpha, 0, args.N), degree=6)
    for name, A in mats.items():
        (L, U), (lam, mu) = A.certified_bandwidths()
        r, c, v = A.spy_triples(1e-13)
        write_csv(out / f"{name}.csv", ["row", "col", "absval"], zip(r.tolist(), c.tolist(), v))
        print(f"{name:16s} blocks ({L},{U})  sub-blocks ({lam},{mu})  nnz {len(v):6d}  "
              f"density {len(v) / np.prod(A.shape):.4f}")


if __name__ == "__main__":
    main()
