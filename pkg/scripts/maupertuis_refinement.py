"""Trajectory-vs-geodesic discrepancy of a bound Kepler orbit as the step halves."""

import argparse
import math

from bertrand_lab.dynamics import PhaseState, kepler
from bertrand_lab.maupertuis import trajectory_geodesic_match
from bertrand_lab.surface import flat_plane


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--E", type=float, default=-0.375)
    ap.add_argument("--K", type=float, default=1.0)
    ap.add_argument("--r0", type=float, default=1.0)
    ap.add_argument("--h0", type=float, default=2e-3)
    ap.add_argument("--levels", type=int, default=4)
    args = ap.parse_args()

    p_r = math.sqrt(2 * (args.E + 1 / args.r0) - (args.K / args.r0) ** 2)
    a = -1 / (2 * args.E)
    period = 2 * math.pi * a ** 1.5
    prev = None
    print(f"{'h':>10} {'discrepancy':>14} {'ratio':>8}")
    for i in range(args.levels):
        h = args.h0 / 2 ** i
        d = trajectory_geodesic_match(flat_plane(), kepler(1.0), args.E,
                                      PhaseState(args.r0, 0.0, p_r, args.K), period, h).discrepancy
        ratio = f"{prev / d:8.2f}" if prev else ""
        print(f"{h:10.2e} {d:14.3e} {ratio}")
        prev = d


if __name__ == "__main__":
    main()
