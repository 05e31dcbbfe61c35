#!/usr/bin/env python3
"""Paired-seed ablation study on the synthetic split-learning task.

Runs the full configuration against its no-feedback and single-iteration
ablations over matched seeds and reports final-accuracy win rates and mean
gaps. Expect the feedback ablation to cost several points and the iteration
ablation to cost around one.
"""

import argparse
import pathlib
import sys
from dataclasses import replace

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from nscsl.config import default_ablation_config
from nscsl.simulator import run_experiment


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--pairs", type=int, default=12, help="number of paired seeds")
    args = parser.parse_args()

    base = default_ablation_config()
    rows = []
    for pair in range(args.pairs):
        seed = pair * 7 + 1
        full = run_experiment(replace(base, seed=seed))[-1].eval_acc
        no_ecl = run_experiment(replace(base, seed=seed, no_ecl=True))[-1].eval_acc
        one_it = run_experiment(replace(base, seed=seed, single_iteration=True))[-1].eval_acc
        rows.append((full, no_ecl, one_it))
        print(f"seed {seed:3d}: full={full:.4f}  no_ecl={no_ecl:.4f}  single_iteration={one_it:.4f}")

    arr = np.array(rows)
    for label, col in (("no_ecl", 1), ("single_iteration", 2)):
        wins = int(np.sum(arr[:, 0] >= arr[:, col]))
        gap = float(np.mean(arr[:, 0] - arr[:, col]))
        print(f"full >= {label}: {wins}/{args.pairs} pairs, mean accuracy gap {gap:+.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
