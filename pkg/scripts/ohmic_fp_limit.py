"""How fast the exact Ohmic coefficients settle onto the high-temperature constants.

Prints the relative gaps |B - 2 g0|/2 g0, |C| hbar Omega_ren / D and
|D - 2 M g0 kT|/(2 M g0 kT) at a few times, for two cutoffs, so the 1/Lambda
initial slip is visible next to the late-time plateau.

    python scripts/ohmic_fp_limit.py [--gamma0 0.2] [--kT 50] [--t-max 5]
"""

import argparse
import math

import numpy as np

from hpzqbm.bath import BathSpec, OhmicExpCutoff
from hpzqbm.coefficients import trajectory, uniform_grid
from hpzqbm.elementary import SystemParams


def gaps(g0, lam, kT, t_max, om_ren=1.0, M=1.0):
    sys = SystemParams(M, math.sqrt(om_ren**2 + (4 / math.pi) * g0 * lam / M), Omega_ren=om_ren)
    tr = trajectory(sys, BathSpec(OhmicExpCutoff(g0, lam, M), beta=1 / kT), "exact",
                    uniform_grid(t_max, 0.05), 1e-3, tol=1e-3)
    with np.errstate(invalid="ignore"):
        return tr.t, (np.abs(tr.B - 2 * g0) / (2 * g0), np.abs(tr.C) * om_ren / tr.D,
                      np.abs(tr.D - 2 * M * g0 * kT) / (2 * M * g0 * kT))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--gamma0", type=float, default=0.2)
    ap.add_argument("--kT", type=float, default=50.0)
    ap.add_argument("--t-max", type=float, default=5.0)
    a = ap.parse_args()
    for lam in (50.0, 100.0):
        t, (eB, eC, eD) = gaps(a.gamma0, lam, a.kT, a.t_max)
        print(f"Lambda = {lam:g}   (10/Lambda = {10 / lam:g})")
        print(f"{'t':>8} {'B gap':>10} {'C/D':>10} {'D gap':>10}")
        for tv in (0.05, 0.1, 0.15, 0.2, 0.3, 0.5, 1.0, a.t_max):
            i = int(round(tv / 0.05))
            if i < t.size:
                print(f"{t[i]:8.2f} {eB[i]:10.4f} {eC[i]:10.4f} {eD[i]:10.4f}")
        print()


if __name__ == "__main__":
    main()
