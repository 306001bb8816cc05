"""Exact third and fourth cumulants of F_n (q = 2) against their MC standard errors.

usage: python3 scripts/cumulant_budget.py [replicates]

Shows how many replicates a cumulant-rate regression needs: an estimate is
informative only where the exact cumulant exceeds a few standard errors.
"""
import math
import sys

from tfrac.covmodel import CovarianceModel
from tfrac.stats import quadratic_variation_cumulants

# jackknife SE of k3, k4 for a near-Gaussian sample scale as sqrt(6/M), sqrt(24/M)


def main(argv):
    reps = int(argv[0]) if argv else 5000
    model = CovarianceModel.of("I", 0.5, 1.0)
    se3, se4 = math.sqrt(6.0 / reps), math.sqrt(24.0 / reps)
    print(f"M = {reps}: SE(k3) ~ {se3:.4f}, SE(k4) ~ {se4:.4f}")
    print(f"{'n':>6} {'k3':>10} {'k3/SE':>7} {'k4':>10} {'k4/SE':>7} {'M for k4 = 3 SE':>16}")
    for e in range(8, 15):
        n = 1 << e
        k3, k4 = quadratic_variation_cumulants(model, n)
        need = math.ceil(24.0 * 9.0 / k4**2)
        print(f"{n:6d} {k3:10.5f} {k3 / se3:7.2f} {k4:10.6f} {k4 / se4:7.3f} {need:16.3g}")


if __name__ == "__main__":
    main(sys.argv[1:])
