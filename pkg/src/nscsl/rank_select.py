"""Bandwidth-aware adaptive rank selection.

The compression rank for a matrix is the minimum of three bounds:

* an energy rank: the smallest rank whose cumulative squared singular values
  reach an ``eta`` fraction of the total energy,
* a bandwidth rank: the largest rank whose factor payload of ``4*r*(m+n)``
  bytes (two single-precision factors) fits the byte budget,
* a fixed rank cap guarding compute cost and conditioning.

The energy rank is computed from the randomized estimate of the leading
spectrum. The estimator only sees the top ``probe_rank`` values, so the
total energy in the denominator is taken as ``||M||_F**2`` (exact, O(mn))
rather than the sum of estimated values; when even the full probe fails to
reach ``eta``, the energy rank is reported as ``min(m, n)`` and the other
two bounds decide.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import linalg
from .spectral import SpectralConfig, estimate_spectrum

__all__ = [
    "BudgetError",
    "RankPolicy",
    "RankDecision",
    "rank_for_energy",
    "rank_for_bandwidth",
    "select_rank",
]

BYTES_PER_VALUE = 4  # factors travel in single precision


class BudgetError(RuntimeError):
    """Byte budget cannot fit even a rank-1 factor pair."""


@dataclass(frozen=True)
class RankPolicy:
    """Energy threshold, byte budget and rank cap for one tensor stream."""

    eta: float
    b_max: int
    r_cap: int

    def __post_init__(self):
        if not 0.0 < self.eta < 1.0:
            raise ValueError(f"eta must lie in (0, 1), got {self.eta}")
        if self.b_max < 1:
            raise ValueError(f"b_max must be positive, got {self.b_max}")
        if self.r_cap < 1:
            raise ValueError(f"r_cap must be positive, got {self.r_cap}")


@dataclass(frozen=True)
class RankDecision:
    """Chosen rank plus the three contributing bounds and achieved coverage."""

    r_final: int
    r_eta: int
    r_bandwidth: int
    r_cap: int
    energy_covered: float


def rank_for_energy(sigmas: np.ndarray, eta: float, *, total_energy: float | None = None) -> int:
    """Smallest rank whose cumulative energy fraction reaches ``eta``.

    ``sigmas`` must be non-increasing and non-negative. The denominator is
    the sum over all provided values unless ``total_energy`` overrides it
    (used when the true total is known but only leading values were
    estimated). Comparisons are exact on doubles: a tie at exactly ``eta``
    selects the smaller rank. All-zero spectra select rank 1, so degenerate
    matrices still produce a decodable payload.

    When ``total_energy`` exceeds what the provided sigmas can cover, the
    threshold may be unreachable; the reported rank is then ``len(sigmas) + 1``
    as a "more than probed" marker (callers clamp it).
    """
    if not 0.0 < eta < 1.0:
        raise ValueError(f"eta must lie in (0, 1), got {eta}")
    sig = np.asarray(sigmas, dtype=float)
    if sig.ndim != 1 or sig.size == 0:
        raise ValueError("sigmas must be a non-empty 1-D array")
    if np.any(sig < 0) or np.any(np.diff(sig) > 0):
        raise ValueError("sigmas must be non-negative and non-increasing")

    energies = sig * sig
    total = float(np.sum(energies)) if total_energy is None else float(total_energy)
    if total <= 0.0:
        return 1
    coverage = np.cumsum(energies) / total
    hits = np.nonzero(coverage >= eta)[0]
    if hits.size == 0:
        return sig.size + 1
    return int(hits[0]) + 1


def rank_for_bandwidth(m: int, n: int, b_max: int) -> int:
    """Largest rank whose ``4*r*(m+n)``-byte factor payload fits ``b_max``.

    Returns 0 when the budget cannot fit rank 1; the caller decides the
    fallback.
    """
    if m < 1 or n < 1 or b_max < 1:
        raise ValueError("m, n, b_max must all be >= 1")
    return b_max // (BYTES_PER_VALUE * (m + n))


def select_rank(
    m_mat: np.ndarray,
    policy: RankPolicy,
    spectral_cfg: SpectralConfig,
    *,
    return_estimate: bool = False,
):
    """Combine the energy, bandwidth and cap bounds for one matrix.

    The probe rank of ``spectral_cfg`` is overridden with
    ``min(r_cap, bandwidth rank, min(m, n) - oversample)`` so the estimate
    always spans the feasible rank range; its oversample shrinks on tiny
    matrices. Raises :class:`BudgetError` when the budget is below the
    rank-1 payload.

    With ``return_estimate`` the spectral estimate computed along the way is
    returned as a second value; its right basis makes a free warm start for
    the compressor.
    """
    mat = np.asarray(m_mat, dtype=float)
    if mat.ndim != 2:
        raise ValueError("select_rank expects a 2-D matrix")
    m, n = mat.shape

    r_bw = rank_for_bandwidth(m, n, policy.b_max)
    if r_bw == 0:
        raise BudgetError(
            f"budget below rank-1 payload: b_max={policy.b_max} < {BYTES_PER_VALUE * (m + n)} bytes"
        )

    short = min(m, n)
    oversample = min(spectral_cfg.oversample, short - 1)
    probe = max(1, min(policy.r_cap, r_bw, short - oversample))
    cfg = dataclasses.replace(spectral_cfg, probe_rank=probe, oversample=oversample)

    est = estimate_spectrum(mat, cfg)
    total_energy = linalg.fro_norm(mat) ** 2
    r_eta = rank_for_energy(est.sigmas, policy.eta, total_energy=total_energy)
    if r_eta > probe:
        r_eta = short  # threshold not reached within the probe: assume full rank

    r_final = min(r_eta, r_bw, policy.r_cap)
    if total_energy > 0.0:
        covered_count = min(r_final, est.sigmas.size)
        covered = float(np.sum(est.sigmas[:covered_count] ** 2) / total_energy)
        covered = min(max(covered, 0.0), 1.0)
    else:
        covered = 1.0  # a zero matrix is reproduced exactly by any rank
    decision = RankDecision(
        r_final=r_final,
        r_eta=r_eta,
        r_bandwidth=r_bw,
        r_cap=policy.r_cap,
        energy_covered=covered,
    )
    return (decision, est) if return_estimate else decision
