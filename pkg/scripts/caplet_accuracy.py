#!/usr/bin/env python3
"""Caplet implied-vol differences on common random numbers.

Compares Picard against Euler (both with the exact drift) and the truncated
drift expansions against the exact drift (Euler).  Prints one table per
comparison, maturities down and strikes across, in basis points of vol.

    python3 scripts/caplet_accuracy.py --paths 50000
"""

import argparse

import numpy as np

from levylibor import Caplet, RngPolicy, RunSpec, SimulationGrid, reference_model, run_experiment

OFFSETS = (-0.01, 0.0, 0.01)


def iv_table(run, n):
    return np.array([e.implied_vol for e in run.estimates], dtype=float).reshape(len(OFFSETS), n).T


def print_table(title, diff_bp):
    print(f"\n{title}  (max {np.nanmax(np.abs(diff_bp)):.3f} bp)")
    print("maturity " + "".join(f"{'atm' if o == 0 else f'atm{o:+.2f}':>12}" for o in OFFSETS))
    for i, row in enumerate(diff_bp, start=1):
        print(f"{i:8d} " + "".join(f"{v:12.4f}" for v in row))


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--paths", type=int, default=50_000)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--rates", type=int, default=20)
    p.add_argument("--steps", type=int, default=5, help="steps per tenor interval")
    p.add_argument("--threads", type=int, default=1)
    args = p.parse_args()

    model = reference_model(args.rates)
    n = model.n_rates
    fwd = model.curve.forwards
    products = [Caplet(float(fwd[i - 1]) + o, i) for o in OFFSETS for i in range(1, n + 1)]
    runs = [RunSpec.of(*r) for r in (("euler", "full"), ("picard", "full"), ("euler", "second_order"), ("euler", "first_order"))]
    res = run_experiment(
        model, runs, SimulationGrid(args.steps), RngPolicy(seed=args.seed), args.paths, products, threads=args.threads
    )
    base = iv_table(res.run("euler", "full"), n)
    print(f"{args.paths} paths, {args.steps} steps per tenor, N = {n}, {res.wall_time:.1f} s")
    for label, (scheme, mode) in (
        ("picard - euler", ("picard", "full")),
        ("second order - full (euler)", ("euler", "second_order")),
        ("first order - full (euler)", ("euler", "first_order")),
    ):
        print_table(label, (iv_table(res.run(scheme, mode), n) - base) / 1e-4)


if __name__ == "__main__":
    main()
