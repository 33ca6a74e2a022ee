"""Run one flow instance end to end and print the descent diagnostics.

Defaults reproduce the reference n = 2 instance (omega = I, chi0 = 2I,
phi0 = 0.3 cos x1) that the acceptance checks pin down; the knobs exist
to poke at neighbouring instances, e.g. larger amplitudes or anisotropic
chi0, without writing a JSON config.
"""

import argparse
import sys

import numpy as np

from jflow import (FlowSetup, TorusGrid, cosine_mode, monitor_max_principle,
                   run, write_series_csv)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--points", type=int, default=32)
    parser.add_argument("--amplitude", type=float, default=0.3)
    parser.add_argument("--chi-scale", type=float, default=2.0,
                        help="chi0 = scale * I")
    parser.add_argument("--t-max", type=float, default=600.0)
    parser.add_argument("--tol", type=float, default=1e-8)
    parser.add_argument("--sample-interval", type=int, default=10)
    parser.add_argument("--deriv", default="fd4",
                        choices=("fd4", "spectral"))
    parser.add_argument("--csv", help="write the sampled series here")
    args = parser.parse_args(argv)

    grid = TorusGrid(n=2, points=args.points, mode="invariant")
    setup = FlowSetup(grid=grid, omega=np.eye(2),
                      chi0=args.chi_scale * np.eye(2), deriv=args.deriv,
                      tol_converge=args.tol, t_max=args.t_max,
                      sample_interval=args.sample_interval)
    phi0 = cosine_mode(grid, [1, 0], args.amplitude)

    result = run(setup, phi0)
    first, last = result.records[0], result.records[-1]
    print(f"verdict      {result.verdict} "
          f"({result.steps} steps, {result.wall_time_s:.1f} s)")
    print(f"residual     {first.residual:.3e} -> {last.residual:.3e}")
    print(f"Jhat         {first.Jhat:.6e} -> {last.Jhat:.6e} "
          f"(monotone={result.jhat_monotone})")
    print(f"lambda band  [{first.lam_min:.6f}, {first.lam_max:.6f}] -> "
          f"[{last.lam_min:.6f}, {last.lam_max:.6f}]")

    monitor = monitor_max_principle(result)
    print(f"band escape  {monitor['band_violation']:.3e} "
          f"(ok={monitor['band_ok']})")
    print(f"chi floor    {monitor['chi_lower_bound']:.6f}, "
          f"escape {monitor['chi_bound_violation']:.3e}")

    jhat = np.array([r.Jhat for r in result.records])
    t = np.array([r.t for r in result.records])
    diss = np.asarray(result.diss_totals)
    if len(t) > 1:
        mism = np.abs(np.diff(jhat) + np.diff(diss)) / np.diff(t)
        print(f"descent id.  max |dJhat/dt + diss rate| = {mism.max():.3e}")

    if args.csv:
        write_series_csv(args.csv, result.records)
        print(f"series       {args.csv} ({len(result.records)} samples)")
    return 0 if result.verdict == "converged" else 1


if __name__ == "__main__":
    sys.exit(main())
