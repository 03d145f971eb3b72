#!/usr/bin/env python3
"""Bisect the cooperator-benefit axis for the takeover threshold.

Runs the bracketing search at a fixed (beta, beta_d) and reports the
final interval together with every evaluation it spent.  The search
keeps the low endpoint defector-dominant (d-win frequency above tau)
and moves the high endpoint down whenever dominance fails, so the
interval brackets the point where defector dominance first gives way
— the lower edge of the transition window, not the cooperator-takeover
point (which sits much higher; the printed evaluations show both).

The defaults reproduce the desk-scale pilot: balanced 0.25/0.25 initial
densities on a side-40 ring, horizon 120, 40 replicas per evaluation,
win threshold 0.9.  At that scale dominance already frays by
beta_c ~ 0.25 for beta_d = 1.  The reported edge is a finite-torus,
finite-horizon estimate and moves with side, horizon, densities, and
threshold, so the JSON output embeds all of them, and it records
whether the lower edge clears the equal-rate point 2 d beta_d / (2d-1),
the natural comparison line for the threshold's location.
"""

import argparse
import json
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from coopsim.errors import BudgetExhausted
from coopsim.experiments import bracket_critical, bracket_to_json
from coopsim.params import equal_rate_benefit


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--beta", type=float, default=4.0)
    ap.add_argument("--beta-d", type=float, default=1.0)
    ap.add_argument("--side", type=int, default=40)
    ap.add_argument("--horizon", type=float, default=120.0)
    ap.add_argument("--replicas", type=int, default=40)
    ap.add_argument("--rho-c", type=float, default=0.25)
    ap.add_argument("--rho-d", type=float, default=0.25)
    ap.add_argument("--tau", type=float, default=0.9)
    ap.add_argument("--lo", type=float, default=0.0)
    ap.add_argument("--hi", type=float, default=16.0)
    ap.add_argument("--budget", type=int, default=8)
    ap.add_argument("--master-seed", type=int, default=2028)
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args()

    print(f"bracketing at beta={args.beta}, beta_d={args.beta_d} "
          f"(side {args.side}, horizon {args.horizon}, {args.replicas} replicas, "
          f"tau {args.tau}, budget {args.budget})")
    t0 = time.perf_counter()
    try:
        bracket = bracket_critical(
            args.beta, args.beta_d,
            dim=1, side=args.side, horizon=args.horizon, replicas=args.replicas,
            rho_c=args.rho_c, rho_d=args.rho_d, master_seed=args.master_seed,
            tau=args.tau, lo=args.lo, hi=args.hi, budget=args.budget,
        )
    except BudgetExhausted as exc:
        print(f"budget exhausted: {exc}")
        bracket = exc.partial
        if bracket is None:
            return 1
    elapsed = time.perf_counter() - t0

    for ev in bracket.evaluations:
        print(f"  beta_c={ev.beta_c:8.4f}  c_wins={ev.freq_c_wins:.3f}  "
              f"d_wins={ev.freq_d_wins:.3f}  (seed {ev.seed})")
    edge = equal_rate_benefit(args.beta_d, 1)
    print(f"bracket: [{bracket.beta_c_low:.4f}, {bracket.beta_c_high:.4f}] "
          f"(width {bracket.width:.4f}) in {elapsed:.1f}s")
    print(f"equal-rate point {edge:.4f}; lower edge exceeds it: "
          f"{bracket.lower_edge_exceeds_equal_rate_point}")

    out = args.out or Path(__file__).resolve().parent.parent / "results" / "bracket.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    payload = bracket_to_json(bracket, args.beta, args.beta_d, args.master_seed)
    out.write_text(json.dumps(json.loads(payload), indent=2) + "\n")
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
