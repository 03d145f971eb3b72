#!/usr/bin/env python3
"""Pilot the block-construction event estimates against their formulas.

Prints, for a few parameter rows each:

* the box-clearing probability (closed form vs Monte Carlo),
* the mark-isolation frequency vs its analytic lower bound (which goes
  negative, hence vacuous, outside a thin parameter sliver),
* the benefit-delivery lower bound (closed form only, by design),
* the rival-free-environment probability (closed form vs Monte Carlo),

then runs the full block-spread estimator at small scales and renders
one oriented-percolation field.  Everything is seeded; rerunning prints
identical numbers.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from coopsim import percolation as pb
from coopsim.params import Params, equal_rate_benefit


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--replicas", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    n = args.replicas

    print("box clearing: closed form vs Monte Carlo")
    for t_hold, d in ((1.0, 1), (2.0, 1), (1.0, 2)):
        exact = pb.prob_a1(t_hold, d)
        freq, se = pb.estimate_a1(t_hold, d, n, rng)
        print(f"  T={t_hold:4.1f} d={d}: exact {exact:.6f}  mc {freq:.6f} +- {se:.6f}")

    print("mark isolation: estimate vs analytic lower bound")
    for beta, beta_d, t_hold, delta in (
        (0.1, 0.0, 1.0, 0.05),
        (2.0, 1.0, 5.0, 0.001),
        (0.01, 0.0, 3.0, 2e-4),
    ):
        p = Params(beta, 0.0, beta_d, 1)
        freq, se = pb.estimate_a2(p, t_hold, delta, 1, n, rng)
        bound = pb.bound_a2(t_hold, delta, 1, p)
        tag = "" if bound > 0 else "  (bound vacuous)"
        print(f"  beta={beta:5.2f} T={t_hold:4.1f} delta={delta:7.5f}: "
              f"mc {freq:.4f} +- {se:.4f}  bound {bound:+.4f}{tag}")

    print("benefit delivery lower bound (closed form)")
    for beta, beta_c in ((0.01, 298_000.0), (4.0, 50.0)):
        val = pb.prob_a3_bound(beta, beta_c, 3.0, 2e-4, 1)
        print(f"  beta={beta:7.2f} beta_c={beta_c:10.1f}: {val:.6f}")

    print("rival-free environment: closed form vs Monte Carlo")
    for L, rho in ((2, 0.001), (3, 1e-4)):
        exact = pb.c_plus_absence_prob(L, 1, rho)
        freq, se = pb.estimate_c_plus_absence(L, 1, rho, n, rng)
        print(f"  L={L} rho={rho:6.4f}: exact {exact:.6f}  mc {freq:.6f} +- {se:.6f}")

    print("block spread at small scales")
    for scale in (4, 8):
        beta_d = 1.0
        p = Params(4.0, equal_rate_benefit(beta_d, 1), beta_d, 1)
        spec = pb.BlockSpec.for_scale(scale)
        res = pb.block_spread_estimate(p, spec, 40, np.random.default_rng(100 + scale))
        print(f"  L={scale}: spread frequency {res.frequency:.3f} +- {res.stderr:.3f} "
              f"({res.replicas} replicas)")

    print("oriented percolation field at epsilon=0.05 (wet cells per level)")
    field = pb.percolate(0.05, 10, 12, sources="all", rng=np.random.default_rng(42))
    print(field.dump_rle())
    print(f"max dry level: G={pb.max_dry_level(field)}  "
          f"H={pb.max_dry_level(field, graph='H')}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
