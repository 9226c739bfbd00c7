"""Pipeline vs brute-force oracle for a discretized Ohmic bath, across Volterra steps.

Shows the coefficient error falling with ds (second order) and the moment error
for a squeezed state over three system periods.

    python scripts/oracle_equivalence.py [--modes 6]
"""

import argparse
import math

import numpy as np

from hpzqbm.bath import BathSpec, OhmicExpCutoff, discretize
from hpzqbm.coefficients import trajectory, uniform_grid
from hpzqbm.dynamics import GaussianMomentState, evolve
from hpzqbm.elementary import SystemParams
from hpzqbm.oracle import FullPhaseSpaceModel, extract_coefficients, recurrence_time, reduced_series
from hpzqbm.verify import moment_errors, scaled_error


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--modes", type=int, default=6)
    a = ap.parse_args()
    sys = SystemParams(1.0, 1.2)
    bath = BathSpec(discretize(OhmicExpCutoff(0.1, 0.3), a.modes), beta=2.0)
    model = FullPhaseSpaceModel(sys, bath)
    t_rec = recurrence_time(bath.spectral)
    t_end = min(3 * 2 * math.pi / sys.Omega, 0.95 * t_rec)
    t_end = math.floor(t_end / 0.1) * 0.1
    print(f"{a.modes} modes, recurrence time {t_rec:.3f}, checking t <= {t_end:.2f}")

    times = [round(x, 2) for x in np.linspace(0, t_end, 12)[1:-1]]
    ref = np.array([extract_coefficients(model, bath, sys, t, derivative="exact").as_tuple() for t in times])
    state = GaussianMomentState(0.0, 0.5, 1.0, 0.4, 0.2)
    print(f"{'ds':>8} " + " ".join(f"{c + ' err':>10}" for c in "ABCD") + f" {'moments':>10}")
    for ds in (2e-3, 1e-3, 5e-4):
        tr = trajectory(sys, bath, "exact", uniform_grid(t_end, 0.01), ds)
        ours = np.array([tr.row(round(t / 0.01)).as_tuple() for t in times])
        errs = [scaled_error(ours[:, j], ref[:, j]) for j in range(4)]
        ser = evolve(state, tr, sys, 0.1)
        m = moment_errors(ser, reduced_series(model, state, ser.t))
        worst = max(m["sigma_qq"], m["sigma_pp"], m["sigma_qp"])
        print(f"{ds:8.0e} " + " ".join(f"{e:10.2e}" for e in errs) + f" {worst:10.2e}")


if __name__ == "__main__":
    main()
