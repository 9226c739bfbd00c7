"""Batch front end.

    hpzqbm <command> --config run.json [--out DIR] [--threads N]

Commands: kernels, elementary, coeffs, evolve, oracle, verify.  Data files go to
the output directory; stdout carries a JSON summary only, diagnostics go to
stderr.  Exit codes: 0 success, 2 configuration error, 3 numerical error,
4 verification failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from .bath import tabulate_kernels
from .coefficients import trajectory, uniform_grid
from .config import load_config
from .dynamics import evolve, write_wigner_csv
from .elementary import elementary_many
from .errors import ConfigurationError, HpzError, SingularBoundaryError
from .io import dump_json
from .oracle import FullPhaseSpaceModel, reduced_series
from .verify import run_verify

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VERIFY = 0, 2, 3, 4

log = logging.getLogger("hpzqbm")


def _kernels(cfg):
    g = cfg.grids
    return tabulate_kernels(cfg.bath, g.ds, max(g.t_max, g.ds))


def _trajectory(cfg, threads):
    g, tol = cfg.grids, cfg.tolerances
    return trajectory(cfg.system, cfg.bath, cfg.mode, uniform_grid(g.t_max, g.dt), g.ds,
                      threads=threads, tol=tol.solver_tol, singular_tol=tol.singular_tol)


def cmd_kernels(cfg, out, threads=1):
    path = os.path.join(out, "kernels.csv")
    _kernels(cfg).to_csv(path)
    return {"files": [path]}, EXIT_OK


def cmd_elementary(cfg, out, threads=1):
    g = cfg.grids
    times = [t for t in cfg.elementary_times if t > 0]
    if not times:
        raise ConfigurationError("elementary needs at least one final time > 0")
    results = elementary_many(cfg.system, _kernels(cfg), times, g.ds, threads=threads,
                              tol=cfg.tolerances.solver_tol, singular_tol=cfg.tolerances.singular_tol)
    files, errors = [], []
    for i, (t, res) in enumerate(zip(times, results)):
        if isinstance(res, SingularBoundaryError):
            log.error("%s", res)
            errors.append({"t": t, "error": str(res)})
            continue
        path = os.path.join(out, f"elementary_{i}.csv")
        res.to_csv(path)
        files.append(path)
    return {"files": files, "singular_boundary": errors}, EXIT_NUMERICAL if errors else EXIT_OK


def cmd_coeffs(cfg, out, threads=1):
    traj = _trajectory(cfg, threads)
    path = os.path.join(out, "coefficients.csv")
    traj.to_csv(path)
    for t in traj.singular_times():
        log.warning("coefficients singular at t=%r; row flagged", t)
    return {"files": [path], "singular_times": traj.singular_times()}, EXIT_OK


def _wigner_files(cfg, series, out, k):
    files = []
    for t in cfg.wigner_times:
        j = round(t / cfg.grids.dt_out)
        if abs(j * cfg.grids.dt_out - t) > 1e-9 * max(1.0, t):
            raise ConfigurationError(f"wigner time {t!r} is not on the dt_out grid")
        path = os.path.join(out, f"wigner_{k}_{j}.csv")
        write_wigner_csv(path, series.state(j))
        files.append(path)
    return files


def cmd_evolve(cfg, out, threads=1):
    if not cfg.initial_states:
        raise ConfigurationError("evolve needs at least one entry in initial_states")
    traj = _trajectory(cfg, threads)
    files = []
    for k, st in enumerate(cfg.initial_states):
        series = evolve(st, traj, cfg.system, cfg.grids.dt_out)
        path = os.path.join(out, f"moments_{k}.csv")
        series.to_csv(path)
        files.append(path)
        files += _wigner_files(cfg, series, out, k)
    return {"files": files}, EXIT_OK


def cmd_oracle(cfg, out, threads=1):
    """Exact reduced moments from the full system+bath, in the evolve CSV layout."""
    if not cfg.initial_states:
        raise ConfigurationError("oracle needs at least one entry in initial_states")
    model = FullPhaseSpaceModel(cfg.system, cfg.bath)
    n = round(cfg.grids.t_max / cfg.grids.dt_out)
    times = [i * cfg.grids.dt_out for i in range(n + 1)]
    files = []
    for k, st in enumerate(cfg.initial_states):
        path = os.path.join(out, f"oracle_moments_{k}.csv")
        reduced_series(model, st, times).to_csv(path)
        files.append(path)
    return {"files": files}, EXIT_OK


def cmd_verify(cfg, out, threads=1):
    report = run_verify(cfg, threads=threads)
    path = os.path.join(out, "verify.json")
    dump_json(report, path)
    for c in report["checks"]:
        if not c["passed"]:
            log.error("check %s failed: measured %r, tolerance %r", c["name"], c["measured"], c["tolerance"])
    return {"files": [path], "passed": report["passed"], "singular_times": report["singular_times"]}, (
        EXIT_OK if report["passed"] else EXIT_VERIFY
    )


COMMANDS = {
    "kernels": cmd_kernels,
    "elementary": cmd_elementary,
    "coeffs": cmd_coeffs,
    "evolve": cmd_evolve,
    "oracle": cmd_oracle,
    "verify": cmd_verify,
}


def build_parser():
    p = argparse.ArgumentParser(prog="hpzqbm", description="Exact quantum Brownian motion coefficients and Gaussian dynamics.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="run configuration (JSON)")
    p.add_argument("--out", default=None, help="output directory (overrides output.dir in the config)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for per-time computations")
    return p


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        log.error("--threads must be >= 1")
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
        out = args.out or cfg.output_dir
        os.makedirs(out, exist_ok=True)
        summary, code = COMMANDS[args.command](cfg, out, args.threads)
    except HpzError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG if isinstance(exc, ValueError) else EXIT_NUMERICAL
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    print(dump_json(summary))
    return code


if __name__ == "__main__":
    sys.exit(main())
