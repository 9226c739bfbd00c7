"""Exact minus second-order coefficients for a single off-resonant mode, versus coupling.

The leading omitted term is fourth order, so each halving of the coupling should
shrink the maximum deviation about sixteen-fold.

    python scripts/weak_coupling_scaling.py
"""

import math

import numpy as np

from hpzqbm.bath import BathMode, BathSpec, Discrete, tabulate_kernels
from hpzqbm.coefficients import trajectory
from hpzqbm.elementary import SystemParams

OMEGA, MODE_FREQ, BETA = 1.0, 2.0, 2.0
T = 3 * 2 * math.pi / OMEGA
DT = T / 400
DS = DT / 40


def deviation(eps):
    bath = BathSpec(Discrete((BathMode(eps, 1.0, MODE_FREQ),)), beta=BETA)
    k = tabulate_kernels(bath, DS, T)
    sys = SystemParams(1.0, OMEGA)
    grid = np.arange(401) * DT
    ex = trajectory(sys, bath, "exact", grid, DS, kernels=k)
    wk = trajectory(sys, bath, "weak", grid, DS, kernels=k)
    return np.array([np.max(np.abs(getattr(ex, c) - getattr(wk, c))) for c in "ABCD"])


def main():
    print(f"{'eps':>7} " + " ".join(f"{'max|d' + c + '|':>11}" for c in "ABCD") + "   ratio to previous")
    prev = None
    for eps in (0.4, 0.2, 0.1, 0.05):
        d = deviation(eps)
        ratio = "" if prev is None else " ".join(f"{r:6.2f}" for r in prev / d)
        print(f"{eps:7.3f} " + " ".join(f"{x:11.3e}" for x in d) + "   " + ratio)
        prev = d


if __name__ == "__main__":
    main()
