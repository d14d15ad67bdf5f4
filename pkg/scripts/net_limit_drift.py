#!/usr/bin/env python
"""Embed nested circle samples in the plane and print per-stage drift."""
from __future__ import annotations

import argparse
import json

from looseembed.lab import net_limit_experiment
from looseembed.manifolds import make_model
from looseembed.solver import SolverConfig


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--model", default="circle", choices=("circle", "sphere", "torus"))
    p.add_argument("--chain", default="4,8,16,32")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--json", action="store_true", help="print the full report")
    args = p.parse_args()

    chain = [int(c) for c in args.chain.split(",")]
    rep = net_limit_experiment(make_model(args.model), chain, args.dim,
                               SolverConfig(restarts=args.restarts), seed=args.seed)
    if args.json:
        print(json.dumps(rep, indent=2))
        return
    print(f"{'points':>6} {'verdict':>9} {'drift max':>10} {'drift mean':>11}")
    for s in rep["stages"]:
        print(f"{s['points']:>6} {s['verdict']:>9} {s['drift_max']:>10.4f} {s['drift_mean']:>11.4f}")
    print(f"final stage weak loose embedding: {rep['final_weak_le']}")


if __name__ == "__main__":
    main()
