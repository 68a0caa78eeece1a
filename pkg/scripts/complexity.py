"""Build+solve time of the rotationally invariant Helmholtz problem (v = cos z) against N."""
import argparse
from pathlib import Path

from capspectral.cli import bench_times, loglog_slope, write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, nargs="+", default=[50, 100, 200, 400])
    ap.add_argument("--alpha", type=float, default=0.2)
    ap.add_argument("--repeat", type=int, default=2)
    ap.add_argument("--out", default="results/complexity.csv")
    args = ap.parse_args()
    Ns = sorted(args.N)
    times = bench_times(Ns, args.alpha, args.repeat)
    for N, t in zip(Ns, times):
        print(f"N={N:4d}  {t:8.3f} s")
    slope = loglog_slope(Ns, times)
    if slope is not None:
        print(f"log-log slope {slope:.3f}")
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_csv(args.out, ["N", "seconds"], zip(Ns, times))


if __name__ == "__main__":
    main()
