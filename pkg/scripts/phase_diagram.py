#!/usr/bin/env python3
"""Sweep the (beta_c, beta_d) plane and write the long-format outcome table.

Two preset scales:

* ``desk`` (default) finishes in a few minutes on one core and is enough
  to see the defector-dominated band at low benefit and the cooperator
  takeover at high benefit.
* ``full`` matches the calibration used for the headline figure (side 100,
  horizon 200, 100 replicas per grid point) and takes hours on one core;
  use ``--jobs`` to spread replicas over cores.  Replica seeding is
  independent of the job count, so the output is identical either way.

The CSV carries one row per grid point with the four outcome frequencies
(summing to 1 exactly), the mean-field regime label for the same rates,
and the per-point seed, so any single point can be re-run in isolation.
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from coopsim.experiments import SweepSpec, sweep_phase_diagram, sweep_to_csv

SCALES = {
    "desk": dict(side=40, horizon=60.0, replicas=40,
                 beta_c_grid=(0.0, 3.0, 6.0, 9.0, 12.0),
                 beta_d_grid=(0.25, 0.75, 1.25, 1.75)),
    "full": dict(side=100, horizon=200.0, replicas=100,
                 beta_c_grid=tuple(float(v) for v in range(0, 17, 2)),
                 beta_d_grid=tuple(0.25 * k for k in range(1, 9))),
}


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scale", choices=sorted(SCALES), default="desk")
    ap.add_argument("--beta", type=float, default=4.0)
    ap.add_argument("--rho-c", type=float, default=0.25)
    ap.add_argument("--rho-d", type=float, default=0.25)
    ap.add_argument("--master-seed", type=int, default=1000)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args()

    preset = SCALES[args.scale]
    spec = SweepSpec(
        beta=args.beta,
        beta_c_grid=preset["beta_c_grid"],
        beta_d_grid=preset["beta_d_grid"],
        side=preset["side"],
        dim=1,
        horizon=preset["horizon"],
        replicas=preset["replicas"],
        master_seed=args.master_seed,
        rho_c=args.rho_c,
        rho_d=args.rho_d,
    )
    n_points = len(spec.beta_c_grid) * len(spec.beta_d_grid)
    print(f"sweeping {n_points} grid points at scale {args.scale!r} "
          f"(side {spec.side}, horizon {spec.horizon}, {spec.replicas} replicas/point)")
    t0 = time.perf_counter()
    points = sweep_phase_diagram(spec, jobs=args.jobs)
    elapsed = time.perf_counter() - t0

    out = args.out or Path(__file__).resolve().parent.parent / "results" / (
        f"phase_diagram_{args.scale}.csv"
    )
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(sweep_to_csv(spec, points))
    print(f"wrote {out} in {elapsed:.1f}s")

    # quick text view: the dominant outcome per grid point, beta_c down, beta_d across
    labels = {"freq_c_wins": "C", "freq_d_wins": "D", "freq_coexist": "X",
              "freq_both_extinct": "-"}
    print("dominant outcome (rows beta_c, cols beta_d); mean-field label in parens")
    header = "  beta_c\\beta_d " + " ".join(f"{bd:6.2f}" for bd in spec.beta_d_grid)
    print(header)
    for bc in spec.beta_c_grid:
        row = [pt for pt in points if pt.beta_c == bc]
        cells = []
        for pt in row:
            freqs = {k: getattr(pt, k) for k in labels}
            top = max(freqs, key=freqs.get)
            mf = {"defectors_win": "d", "bistable": "b", "boundary": "="}.get(
                pt.mf_regime, "?"
            )
            cells.append(f"{labels[top]}({mf})  ")
        print(f"  {bc:13.2f} " + " ".join(cells))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
