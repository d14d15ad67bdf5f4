#!/usr/bin/env python
"""Fraction of monotone median-residual profiles as the ball radius grows."""
from __future__ import annotations

import argparse

import numpy as np

from looseembed.lab import max_ball_radius, monotonicity_experiment
from looseembed.manifolds import make_model


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--model", default="sphere", choices=("circle", "sphere", "torus"))
    p.add_argument("--angle-bound", type=float, default=0.1)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--m", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    model = make_model(args.model)
    rmax = max_ball_radius(model)
    print(f"{'radius':>8} {'monotone':>9} {'min step':>10}")
    for r in np.geomspace(1e-3, 0.95 * rmax, 8):
        rep = monotonicity_experiment(model, float(r), args.angle_bound, args.samples, args.m, args.seed)
        print(f"{r:>8.4f} {rep['monotone_fraction']:>9.3f} {rep['min_increment']:>10.2e}")


if __name__ == "__main__":
    main()
