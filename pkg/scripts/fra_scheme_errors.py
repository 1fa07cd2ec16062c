#!/usr/bin/env python3
"""FRA errors of the stepping schemes.

``bias`` mode: one step per tenor interval, each scheme paired against an
IPC run on a fine grid driven by the same driver path, so the printed
biases carry little Monte Carlo noise.

``prices`` mode: raw ATM FRA prices (true value zero) for every scheme at
5 steps per tenor.  ``--paths 5000000`` is the long run; expect a few
hours on one core.

    python3 scripts/fra_scheme_errors.py bias --paths 32768
    python3 scripts/fra_scheme_errors.py prices --paths 500000
"""

import argparse

import numpy as np

from levylibor import Fra, LiborEngine, RngPolicy, RunSpec, Scheme, SimulationGrid, reference_model, run_experiment
from levylibor.simulation import coarsen_increments, draw_increments, simulate_block

ONE_STEP = [Scheme.EULER, Scheme.PICARD, Scheme.PC, Scheme.IPC]
STEPPING = ONE_STEP + [Scheme.PICARD_PC, Scheme.PICARD_IPC]


def atm_fras(model):
    return [Fra(float(model.curve.forwards[i - 1]), i) for i in range(1, model.n_rates + 1)]


def bias(model, args):
    engine = LiborEngine(model, "full")
    fras = atm_fras(model)
    rng = RngPolicy(seed=args.seed)
    fine, coarse = SimulationGrid(args.fine_steps), SimulationGrid(1)
    pairs = {s: [] for s in ONE_STEP}
    for b, size in enumerate(rng.blocks(args.paths)):
        inc = draw_increments(model, fine, rng.generator(b), size, True)
        ref = simulate_block(engine, Scheme.IPC, fine, inc, fras)
        inc1 = coarsen_increments(inc, model.n_rates, 1)
        half = size // 2
        for s in ONE_STEP:
            u = simulate_block(engine, s, coarse, inc1, fras) - ref
            pairs[s].append(0.5 * (u[:half] + u[half:]))
    print(f"one-step FRA bias vs IPC at {args.fine_steps} steps per tenor, {args.paths} paths (bp, +- 1 SE)")
    print("expiry" + "".join(f"{s.value:>22}" for s in ONE_STEP))
    stats = {s: np.concatenate(v) for s, v in pairs.items()}
    for k in range(model.n_rates):
        cells = []
        for s in ONE_STEP:
            x = stats[s][:, k]
            cells.append(f"{x.mean() / 1e-4:12.5f} +-{x.std(ddof=1) / np.sqrt(x.size) / 1e-4:8.5f}")
        print(f"{k + 1:6d}" + "".join(f"{c:>22}" for c in cells))


def prices(model, args):
    runs = [RunSpec.of(s, "full") for s in STEPPING]
    res = run_experiment(
        model, runs, SimulationGrid(args.steps), RngPolicy(seed=args.seed), args.paths, atm_fras(model),
        threads=args.threads,
    )  # fmt: skip
    print(f"ATM FRA prices, {args.steps} steps per tenor, {args.paths} paths, {res.wall_time:.0f} s")
    for run in res.runs:
        p = np.array([e.price for e in run.estimates]) / 1e-4
        se = np.array([e.std_error for e in run.estimates]) / 1e-4
        k = int(np.argmax(np.abs(p)))
        print(f"{run.spec.scheme.value:>12}: max |price| {abs(p[k]):.4f} bp at expiry {k + 1} (SE {se[k]:.4f} bp)")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("mode", choices=["bias", "prices"])
    p.add_argument("--paths", type=int, default=32768)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--steps", type=int, default=5, help="steps per tenor (prices mode)")
    p.add_argument("--fine-steps", type=int, default=20, help="reference grid (bias mode)")
    p.add_argument("--threads", type=int, default=1)
    args = p.parse_args()
    model = reference_model()
    (bias if args.mode == "bias" else prices)(model, args)


if __name__ == "__main__":
    main()
