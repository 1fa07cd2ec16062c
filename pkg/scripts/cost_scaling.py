#!/usr/bin/env python3
"""Drift cost counters and measured wall time against the number of rates.

Prints the counter table of the literal algorithm, then runs the ``bench``
subcommand (wall time over N and over path counts) and its fitted growth
rates.  The bench CSV and its manifest go to ``--out``.

    python3 scripts/cost_scaling.py --out bench_out
"""

import argparse

from levylibor.cli import main as cli_main
from levylibor.drift import drift_cost


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", help="INI config with a [bench] section")
    p.add_argument("--out", default="bench_out")
    p.add_argument("--max-n", type=int, default=25)
    args = p.parse_args()

    print(f"{'n':>3} {'full evals':>14} {'2^n':>10} {'full terms':>12} {'2nd evals':>10} {'1st evals':>10}")
    for n in range(args.max_n + 1):
        full, second, first = (drift_cost(n, m) for m in ("full", "second_order", "first_order"))
        print(
            f"{n:3d} {full.cumulant_evals:14d} {2**n:10d} {full.product_terms:12d} "
            f"{second.cumulant_evals:10d} {first.cumulant_evals:10d}"
        )
    print(f"\nsecond order is 1 + 3n + 7 C(n,2); n=10 -> 20 ratio {drift_cost(20, 'second_order').cumulant_evals / drift_cost(10, 'second_order').cumulant_evals:.3f}")
    print(f"full product terms double per rate; evals grow by ~3 (n=19/18: {drift_cost(19, 'full').cumulant_evals / drift_cost(18, 'full').cumulant_evals:.3f})")

    argv = ["bench", "--out", args.out]
    if args.config:
        argv += ["--config", args.config]
    print()
    return cli_main(argv)


if __name__ == "__main__":
    raise SystemExit(main())
