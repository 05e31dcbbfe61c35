#!/usr/bin/env python3
"""Reproduce the bandwidth sweep table: reconstruction MSE per compressor at
25/50/100/200 Mbps byte budgets on the planted power-law corpus.

The adaptive compressor runs without residual feedback so every variant is
compared one-shot. Equivalent to `nscsl sweep`, kept here as a runnable
experiment script with a formatted table.
"""

import argparse
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from nscsl.cli import DEFAULT_BANDWIDTHS_MBPS, DEFAULT_SWEEP_COMPRESSORS, run_sweep
from nscsl.config import DEFAULT_SEED


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    parser.add_argument("--out", help="optional CSV path")
    args = parser.parse_args()

    rows = run_sweep(
        list(DEFAULT_BANDWIDTHS_MBPS), list(DEFAULT_SWEEP_COMPRESSORS), seed=args.seed
    )
    table = {}
    for row in rows:
        table.setdefault(row["compressor"], {})[row["bandwidth_mbps"]] = row["mean_mse"]

    header = "compressor  " + "".join(f"{int(b):>12d} Mbps" for b in DEFAULT_BANDWIDTHS_MBPS)
    print(header)
    print("-" * len(header))
    for comp, cells in table.items():
        print(f"{comp:<12s}" + "".join(f"{cells[b]:>17.3e}" for b in DEFAULT_BANDWIDTHS_MBPS))

    if args.out:
        from nscsl.cli import _write_rows_csv

        _write_rows_csv(args.out, rows)
        print(f"\nwrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
