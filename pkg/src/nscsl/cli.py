"""Command-line entry point.

Subcommands:

* ``run``: one experiment from a config file (plus flag overrides)
* ``sweep``: compressor x bandwidth grid of reconstruction MSE on a fixed
  synthetic matrix corpus
* ``ablate``: the canned ablation experiment in one of its modes
* ``goldens``: emit or verify the golden wire vectors
* ``oracle``: compare the compressor and the spectral estimator against
  exact SVD on planted-spectrum matrices

Exit codes: 0 success, 1 configuration/usage error, 2 runtime error.
``NSC_LOG`` sets log verbosity (DEBUG/INFO/WARNING/ERROR).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import linalg, oasa
from .baselines import NscCompressor, decode_to_matrix, make_compressor
from .config import (
    DEFAULT_SEED,
    ConfigError,
    ExperimentConfig,
    apply_ablation,
    default_ablation_config,
    describe_schema,
    load_config,
)
from .goldens import emit_goldens, verify_goldens
from .oasa import OasaConfig
from .rank_select import BudgetError
from .simulator import run_experiment
from .spectral import SpectralConfig, estimate_spectrum

log = logging.getLogger("nscsl")

DEFAULT_BANDWIDTHS_MBPS = (25.0, 50.0, 100.0, 200.0)
DEFAULT_SWEEP_COMPRESSORS = ("nsc", "randtopk", "quant", "fixedrank")
# Decimal megabits (1 Mbps = 1e6 bits/s), networking convention; not MiB.
BITS_PER_MBPS = 1e6
SWEEP_SLOT_S = 0.0025
SWEEP_SHAPE = (128, 96)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage problems are configuration errors: exit 1, not argparse's 2
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def _mbps_to_budget_bytes(mbps: float, slot_s: float) -> int:
    return max(1, int(mbps * BITS_PER_MBPS * slot_s / 8.0))


def sweep_corpus(seed: int, count: int = 4) -> list[np.ndarray]:
    """Planted power-law matrices shared by every sweep cell."""
    m, n = SWEEP_SHAPE
    sigmas = linalg.powerlaw_sigmas(min(m, n), exponent=2.0)
    return [
        linalg.planted_matrix(m, n, sigmas, seed=linalg.derive_seed(seed, 41, i))
        for i in range(count)
    ]


def sweep_cell_mse(variant: str, budget_bytes: int, corpus: list[np.ndarray], seed: int) -> float:
    """Mean reconstruction MSE of one (compressor, budget) cell.

    The adaptive variant runs without residual feedback here: each matrix is
    compressed once, so feedback state would never be exercised and the
    comparison stays one-shot for every variant.
    """
    if variant == "nsc":
        comp = NscCompressor(
            eta=0.999999,
            r_cap=min(SWEEP_SHAPE),
            oasa_cfg=OasaConfig(),
            ecl_enabled=False,
        )
    else:
        comp = make_compressor(variant)
    mses = []
    for i, mat in enumerate(corpus):
        payload = comp.compress(mat, budget_bytes, seed=linalg.derive_seed(seed, 42, i))
        out = decode_to_matrix(payload)
        mses.append(float(np.mean((out - mat) ** 2)))
    return float(np.mean(mses))


def run_sweep(
    bandwidths_mbps: list[float],
    compressors: list[str],
    *,
    seed: int,
    slot_s: float = SWEEP_SLOT_S,
    corpus_size: int = 4,
) -> list[dict]:
    """Grid of mean MSE per (compressor, bandwidth); deterministic ordering."""
    if not bandwidths_mbps or not compressors:
        raise ConfigError("sweep needs at least one bandwidth and one compressor")
    corpus = sweep_corpus(seed, corpus_size)
    rows = []
    for variant in compressors:
        for mbps in bandwidths_mbps:
            budget = _mbps_to_budget_bytes(mbps, slot_s)
            mse = sweep_cell_mse(variant, budget, corpus, seed)
            log.info("sweep %s @ %s Mbps -> budget %d B, mse %.3e", variant, mbps, budget, mse)
            rows.append(
                {
                    "compressor": variant,
                    "bandwidth_mbps": mbps,
                    "budget_bytes": budget,
                    "mean_mse": mse,
                }
            )
    return rows


def oracle_report(seed: int) -> list[dict]:
    """Accuracy of the production paths against the exact-SVD oracle."""
    rows = []
    for i, (m, n, r) in enumerate([(64, 48, 4), (96, 96, 8), (128, 80, 6)]):
        sigmas = linalg.powerlaw_sigmas(min(m, n), exponent=2.0)
        mat = linalg.planted_matrix(m, n, sigmas, seed=linalg.derive_seed(seed, 51, i))
        _, s_true, _ = linalg.exact_svd(mat)

        est = estimate_spectrum(
            mat, SpectralConfig(probe_rank=r, oversample=8, power_iters=2, seed=seed + i)
        )
        spectral_err = float(np.max(np.abs(est.sigmas - s_true[:r]) / s_true[:r]))

        res = oasa.compress(
            mat, r, OasaConfig(seed=seed + i), ecl_enabled=False, prev_q=est.v_basis
        )
        optimal = float(np.sqrt(np.sum(s_true[r:] ** 2)))
        actual = linalg.fro_norm(mat - oasa.decompress(res.factors))
        rows.append(
            {
                "m": m,
                "n": n,
                "rank": r,
                "residual_ratio": actual / optimal,
                "spectral_max_rel_err": spectral_err,
            }
        )
    return rows


def _write_rows_csv(path: str, rows: list[dict]) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=target.parent, prefix=target.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            writer = csv.DictWriter(handle, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
        os.replace(tmp_name, target)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def _print_rows(rows: list[dict]) -> None:
    for row in rows:
        print("  ".join(f"{k}={v}" for k, v in row.items()))


def _load_run_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.rounds is not None:
        overrides["rounds"] = args.rounds
    if args.out is not None:
        overrides["out"] = args.out
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    return cfg.validate()


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="nscsl",
        description=__doc__,
        epilog="config file keys (key = value, one per line):\n" + describe_schema(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment from a config file")
    run_p.add_argument("--config", help="path to a key = value config file")
    run_p.add_argument("--out", help="CSV output path (overrides config)")
    run_p.add_argument("--seed", type=int, help="seed override")
    run_p.add_argument("--rounds", type=int, help="round-count override")

    sweep_p = sub.add_parser("sweep", help="compressor x bandwidth MSE grid")
    sweep_p.add_argument(
        "--bandwidth-mbps",
        default=",".join(str(b) for b in DEFAULT_BANDWIDTHS_MBPS),
        help="comma-separated decimal-megabit rates",
    )
    sweep_p.add_argument(
        "--compressor",
        default=",".join(DEFAULT_SWEEP_COMPRESSORS),
        help="comma-separated compressor variants",
    )
    sweep_p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sweep_p.add_argument("--slot-s", type=float, default=SWEEP_SLOT_S,
                         help="transfer slot converting Mbps to a byte budget")
    sweep_p.add_argument("--out", help="CSV output path")

    ablate_p = sub.add_parser("ablate", help="run the canned ablation experiment")
    ablate_p.add_argument(
        "--ablation",
        required=True,
        choices=["full", "no_ecl", "single_iteration", "no_warm_start"],
    )
    ablate_p.add_argument("--config", help="base config (default: tuned ablation setup)")
    ablate_p.add_argument("--seed", type=int, help="seed override")
    ablate_p.add_argument("--rounds", type=int, help="round-count override")
    ablate_p.add_argument("--out", help="CSV output path")

    gold_p = sub.add_parser("goldens", help="emit or verify golden wire vectors")
    gold_mode = gold_p.add_mutually_exclusive_group(required=True)
    gold_mode.add_argument("--emit", metavar="DIR")
    gold_mode.add_argument("--verify", metavar="DIR")

    oracle_p = sub.add_parser("oracle", help="exact-SVD comparison report")
    oracle_p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    oracle_p.add_argument("--out", help="CSV output path")

    return parser


def _dispatch(args) -> int:
    if args.command == "run":
        cfg = _load_run_config(args)
        history = run_experiment(cfg)
        last = history[-1]
        print(
            f"rounds={len(history)} final_loss={last.loss:.6f} "
            f"final_acc={last.eval_acc:.4f} sim_time_s={sum(m.sim_time_s for m in history):.3f}"
        )
        if cfg.out:
            print(f"wrote {cfg.out}")
        return 0

    if args.command == "sweep":
        bandwidths = [float(b) for b in args.bandwidth_mbps.split(",") if b.strip()]
        compressors = [c.strip() for c in args.compressor.split(",") if c.strip()]
        for c in compressors:
            if c not in DEFAULT_SWEEP_COMPRESSORS:
                raise ConfigError(f"unknown compressor {c!r}")
        rows = run_sweep(bandwidths, compressors, seed=args.seed, slot_s=args.slot_s)
        if args.out:
            _write_rows_csv(args.out, rows)
            print(f"wrote {args.out}")
        else:
            _print_rows(rows)
        return 0

    if args.command == "ablate":
        base = load_config(args.config) if args.config else default_ablation_config()
        cfg = apply_ablation(base, args.ablation)
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
        if args.rounds is not None:
            cfg = dataclasses.replace(cfg, rounds=args.rounds)
        if args.out is not None:
            cfg = dataclasses.replace(cfg, out=args.out)
        cfg.validate()
        history = run_experiment(cfg)
        print(
            f"ablation={args.ablation} rounds={len(history)} "
            f"final_loss={history[-1].loss:.6f} final_acc={history[-1].eval_acc:.4f}"
        )
        if cfg.out:
            print(f"wrote {cfg.out}")
        return 0

    if args.command == "goldens":
        if args.emit:
            for path in emit_goldens(args.emit):
                print(f"wrote {path}")
            return 0
        problems = verify_goldens(args.verify)
        if problems:
            for problem in problems:
                print(problem, file=sys.stderr)
            return 2
        print("goldens ok")
        return 0

    if args.command == "oracle":
        rows = oracle_report(args.seed)
        if args.out:
            _write_rows_csv(args.out, rows)
            print(f"wrote {args.out}")
        else:
            _print_rows(rows)
        return 0

    raise AssertionError(f"unhandled command {args.command}")


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("NSC_LOG", "WARNING").upper()
    if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        level = "WARNING"
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except BudgetError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
