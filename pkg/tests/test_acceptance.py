"""Acceptance suite: every exit criterion at its stated tolerance.

Each test prints one ``[criterion NN] PASS`` line (run with ``-s`` or ``-v``
to see them stream); a failed assertion leaves the criterion visibly red.
"""

from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from nscsl import linalg, oasa, wire
from nscsl.baselines import (
    FixedRankCompressor,
    NscCompressor,
    QuantCompressor,
    RandTopkCompressor,
    decode_to_matrix,
)
from nscsl.config import ExperimentConfig, default_ablation_config
from nscsl.goldens import verify_goldens
from nscsl.linalg import exact_svd, fro_norm, planted_matrix, powerlaw_sigmas
from nscsl.oasa import ErrorState, OasaConfig
from nscsl.rank_select import RankPolicy, rank_for_energy, select_rank
from nscsl.simulator import run_experiment, train_unsplit_reference
from nscsl.spectral import SpectralConfig, estimate_spectrum

GOLDEN_DIR = Path(__file__).parent / "goldens"


def ok(num: int, detail: str) -> None:
    print(f"\n[criterion {num:02d}] PASS: {detail}")


def test_c01_near_optimal_low_rank_residual():
    worst = 0.0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        m, n = int(rng.integers(48, 129)), int(rng.integers(48, 129))
        sig = powerlaw_sigmas(min(m, n), exponent=float(rng.uniform(1.5, 3.0)))
        mat = planted_matrix(m, n, sig, seed=seed + 10_000)
        r = int(rng.integers(2, 13))
        est = estimate_spectrum(
            mat, SpectralConfig(probe_rank=r, oversample=8, power_iters=2, seed=seed)
        )
        res = oasa.compress(
            mat, r, OasaConfig(max_iters=10, seed=seed), ecl_enabled=False, prev_q=est.v_basis
        )
        optimal = float(np.sqrt(np.sum(sig[r:] ** 2)))
        ratio = fro_norm(mat - oasa.decompress(res.factors)) / optimal
        worst = max(worst, ratio)
        assert ratio <= 1.05, f"seed {seed}: residual ratio {ratio}"
    ok(1, f"50 seeds, residual <= 1.05 x truncated-SVD optimum (worst {worst:.6f})")


def test_c02_exact_rank_recovery():
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed + 200)
        m, n = int(rng.integers(16, 80)), int(rng.integers(16, 80))
        r = int(rng.integers(1, min(9, min(m, n) + 1)))
        sig = np.sort(rng.uniform(0.5, 5.0, size=r))[::-1]
        mat = planted_matrix(m, n, sig, seed=seed)
        res = oasa.compress(mat, r, OasaConfig(seed=seed), ecl_enabled=False)
        rel = fro_norm(mat - oasa.decompress(res.factors)) / fro_norm(mat)
        worst = max(worst, rel)
        assert rel < 1e-7, f"seed {seed}: relative error {rel}"
    ok(2, f"20 seeds, exact-rank round-trip error < 1e-7 (worst {worst:.2e})")


def test_c03_spectral_estimation_accuracy():
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed + 300)
        m, n = int(rng.integers(48, 129)), int(rng.integers(48, 129))
        sig = linalg.geometric_sigmas(min(m, n))  # 2^-1, 2^-2, ...
        mat = planted_matrix(m, n, sig, seed=seed + 11_000)
        est = estimate_spectrum(
            mat, SpectralConfig(probe_rank=8, oversample=8, power_iters=2, seed=seed)
        )
        rel = float(np.max(np.abs(est.sigmas - sig[:8]) / sig[:8]))
        worst = max(worst, rel)
        assert rel <= 0.01, f"seed {seed}: max relative error {rel}"
    ok(3, f"20 seeds, leading singular values within 1% (worst {worst:.2e})")


def test_c04_rank_selection_against_oracle():
    agree = 0
    trials = 200
    for seed in range(trials):
        rng = np.random.default_rng(seed + 400)
        m, n = int(rng.integers(24, 112)), int(rng.integers(24, 112))
        k = min(m, n)
        sig = np.arange(1, k + 1, dtype=float) ** -float(rng.uniform(0.8, 2.2))
        mat = planted_matrix(m, n, sig, seed=seed + 12_000)
        eta = float(rng.uniform(0.5, 0.97))
        policy = RankPolicy(
            eta=eta,
            b_max=int(rng.integers(4 * (m + n), 10**6)),
            r_cap=int(rng.integers(2, k + 1)),
        )
        decision = select_rank(
            mat, policy, SpectralConfig(probe_rank=1, oversample=8, power_iters=2, seed=seed)
        )
        assert 4 * decision.r_final * (m + n) <= policy.b_max
        _, s_true, _ = exact_svd(mat)
        r_oracle = rank_for_energy(s_true, eta)
        if abs(decision.r_eta - r_oracle) <= 1:
            agree += 1
    assert agree >= 0.95 * trials, f"rank agreement {agree}/{trials}"
    ok(4, f"rank within +/-1 of oracle in {agree}/{trials} trials; budget never exceeded")


def test_c05_byte_formula_exactness():
    rng = np.random.default_rng(500)
    for _ in range(1000):
        m, n = int(rng.integers(1, 300)), int(rng.integers(1, 300))
        r = int(rng.integers(1, min(m, n) + 1))
        factors = oasa.LowRankFactors(
            p_mat=np.zeros((m, r)), q_mat=np.zeros((n, r)), rank=r
        )
        buf = wire.encode(factors)
        assert len(buf) - wire.HEADER_LEN == 4 * r * (m + n)
    ok(5, "1000 random shapes: lowrank body length is exactly 4*r*(m+n)")


def test_c06_split_unsplit_equivalence():
    cfg = ExperimentConfig(
        rounds=100,
        n_clients=5,
        batch_size=128,
        learning_rate=0.05,
        samples_per_client=256,
        separation=4.0,
        eta=0.999999,
        r_cap=12,
        budget_slot_s=10.0,
        max_iters=20,
        eval_every=25,
        seed=7,
    )
    history = run_experiment(cfg)
    reference = train_unsplit_reference(cfg)
    worst = max(abs(h.loss - ref) for h, ref in zip(history, reference))
    assert worst < 1e-5, f"max per-step loss deviation {worst}"
    ok(6, f"100 rounds, lossless split tracks the monolithic trainer (max diff {worst:.2e})")


def test_c07_bandwidth_sweep_directions():
    bandwidth_budgets = [7812, 15625, 31250, 62500]  # 25/50/100/200 Mbps at 2.5 ms
    m, n = 128, 96
    sigmas = powerlaw_sigmas(n, exponent=2.0)
    seeds = range(20)
    nsc_curves = []
    cell_wins = {b: 0 for b in bandwidth_budgets}
    for seed in seeds:
        mat = planted_matrix(m, n, sigmas, seed=seed + 700)
        curve = []
        for budget in bandwidth_budgets:
            nsc = NscCompressor(eta=0.999999, r_cap=n, ecl_enabled=False)
            mse_nsc = float(
                np.mean((decode_to_matrix(nsc.compress(mat, budget, seed=seed)) - mat) ** 2)
            )
            curve.append(mse_nsc)
            others = [
                float(np.mean((decode_to_matrix(c.compress(mat, budget, seed=seed)) - mat) ** 2))
                for c in (RandTopkCompressor(), QuantCompressor(), FixedRankCompressor(rank=6))
            ]
            if all(mse_nsc <= o for o in others):
                cell_wins[budget] += 1
        nsc_curves.append(curve)
    for budget, wins in cell_wins.items():
        assert wins >= 0.9 * len(list(seeds)), f"budget {budget}: won {wins}/20"
    for curve in nsc_curves:
        assert all(curve[i + 1] <= curve[i] for i in range(len(curve) - 1)), curve
    ok(7, f"adaptive MSE <= every baseline in {min(cell_wins.values())}/20 seeds per cell, "
          "monotone in bandwidth")


@pytest.mark.slow
def test_c08_ablation_directions():
    base = default_ablation_config()
    pairs = 12
    rows = []
    for seed in range(pairs):
        s = seed * 7 + 1
        full = run_experiment(replace(base, seed=s))[-1].eval_acc
        no_ecl = run_experiment(replace(base, seed=s, no_ecl=True))[-1].eval_acc
        one_it = run_experiment(replace(base, seed=s, single_iteration=True))[-1].eval_acc
        rows.append((full, no_ecl, one_it))
    arr = np.array(rows)
    ecl_wins = int(np.sum(arr[:, 0] >= arr[:, 1]))
    it_wins = int(np.sum(arr[:, 0] >= arr[:, 2]))
    ecl_gap = float(np.mean(arr[:, 0] - arr[:, 1]))
    it_gap = float(np.mean(arr[:, 0] - arr[:, 2]))
    assert ecl_wins >= 0.7 * pairs, f"feedback ablation won {ecl_wins}/{pairs}"
    assert it_wins >= 0.7 * pairs, f"iteration ablation won {it_wins}/{pairs}"
    assert ecl_gap > 0, f"feedback mean gap {ecl_gap}"
    assert it_gap > 0, f"iteration mean gap {it_gap}"
    ok(8, f"feedback: {ecl_wins}/{pairs} wins, gap {ecl_gap:+.4f}; "
          f"iteration: {it_wins}/{pairs} wins, gap {it_gap:+.4f}")


def test_c09_error_feedback_contraction():
    worst = 0.0
    for seed in range(20):
        mat = planted_matrix(40, 30, powerlaw_sigmas(30, 1.5), seed=seed + 900)
        state = ErrorState(40, 30)
        # beta = 0 with the residual taken against the compensated input is
        # the classic error-feedback recursion this criterion exercises
        cfg = OasaConfig(beta=0.0, feedback_on_compensated=True, seed=seed)
        acc = np.zeros_like(mat)
        d1 = d50 = None
        for k in range(1, 51):
            res = oasa.compress(mat, 3, cfg, state)
            acc += oasa.decompress(res.factors)
            dist = fro_norm(acc / k - mat)
            if k == 1:
                d1 = dist
        d50 = dist
        ratio = d50 / d1
        worst = max(worst, ratio)
        assert ratio < 0.5, f"seed {seed}: K=50/K=1 distance ratio {ratio}"
    ok(9, f"20 seeds, running-average distance at K=50 below 50% of K=1 (worst {worst:.3f})")


def test_c10_gradient_correctness():
    from test_model import analytic_grads, finite_difference_grads
    from nscsl import model

    for seed in range(10):
        rng = np.random.default_rng(seed + 1000)
        client, server = model.init_params(d_in=5, hidden=4, hidden2=3, classes=3, seed=seed)
        x = rng.standard_normal((6, 5))
        y = rng.integers(0, 3, size=6)
        fd = finite_difference_grads(client, server, x, y)
        analytic = analytic_grads(client, server, x, y)
        for name, g in analytic.items():
            denom = np.maximum(np.abs(fd[name]), 1e-6)
            rel = np.max(np.abs(g - fd[name]) / denom)
            assert rel < 1e-4, f"seed {seed} block {name}: {rel}"
    ok(10, "10 seeds, analytic gradients match central differences at every block")


def _macs_per_iteration(m: int, n: int, r: int, seed: int = 3) -> float:
    mat = linalg.gaussian(m, n, seed)
    counts = {}
    for iters in (2, 4):
        cfg = OasaConfig(max_iters=iters, min_iters=iters, seed=seed)
        linalg.reset_mac_count()
        oasa.compress(mat, r, cfg, ecl_enabled=False)
        counts[iters] = linalg.mac_count()
    return (counts[4] - counts[2]) / 2.0


def _fit_slope(xs: list[int], ys: list[float]) -> float:
    lx, ly = np.log(xs), np.log(ys)
    return float(np.polyfit(lx, ly, 1)[0])


def test_c11_complexity_scaling():
    slope_m = _fit_slope([64, 128, 256, 512], [_macs_per_iteration(m, 96, 6) for m in (64, 128, 256, 512)])
    slope_n = _fit_slope([64, 128, 256, 512], [_macs_per_iteration(96, n, 6) for n in (64, 128, 256, 512)])
    slope_r = _fit_slope([2, 4, 8, 16], [_macs_per_iteration(256, 256, r) for r in (2, 4, 8, 16)])
    for name, slope in (("m", slope_m), ("n", slope_n), ("r", slope_r)):
        assert 0.85 <= slope <= 1.15, f"{name}-scaling exponent {slope}"
    ok(11, f"per-iteration MAC scaling exponents m={slope_m:.3f} n={slope_n:.3f} r={slope_r:.3f}")


def test_c12_determinism_and_wire_stability(tmp_path):
    cfg = ExperimentConfig(
        rounds=8, n_clients=3, batch_size=32, samples_per_client=64,
        hidden=10, hidden2=8, d_in=12, seed=4242, out=str(tmp_path / "a.csv"),
    )
    run_experiment(cfg)
    run_experiment(replace(cfg, out=str(tmp_path / "b.csv")))
    a = (tmp_path / "a.csv").read_bytes()
    b = (tmp_path / "b.csv").read_bytes()
    assert a == b, "same seed must produce byte-identical CSVs"
    problems = verify_goldens(GOLDEN_DIR)
    assert problems == [], problems
    ok(12, "byte-identical CSVs for a fixed seed; golden wire vectors decode identically")
