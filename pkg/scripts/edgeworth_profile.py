"""MC estimate of sqrt(n) (P(F_n <= z) - Phi(z)) against the exact first Edgeworth term.

usage: python3 scripts/edgeworth_profile.py [replicates]

Prints one row per (n, z) so the approach to the limit profile is visible.
"""
import sys

import numpy as np

from tfrac.covmodel import CovarianceModel, exact_asymptotic_profile
from tfrac.stats import edgeworth_check


def main(argv):
    reps = int(argv[0]) if argv else 20_000
    model = CovarianceModel.of("I", 0.5, 1.0)
    z_grid = np.linspace(-2.5, 2.5, 11)
    rep = edgeworth_check(model, 2, z_grid, [256, 1024, 4096], reps)
    print(f"rho = {rep.rho:.12f}, replicates = {reps}")
    print(f"{'n':>6} {'z':>6} {'estimate':>10} {'profile':>10} {'stderr':>9}")
    for r in rep.records:
        print(f"{r['n']:6d} {r['z']:6.2f} {r['estimate']:10.4f} {r['target']:10.4f} {r['stderr']:9.4f}")
    for z in (-2.0, 0.0, 2.0):
        print(f"profile({z:+.0f}) = {exact_asymptotic_profile(model, 2, z)[1]:+.6f}")


if __name__ == "__main__":
    main(sys.argv[1:])
