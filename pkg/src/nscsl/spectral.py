"""Randomized estimation of leading singular values and subspaces.

Sketch the target with a Gaussian probe, optionally sharpen the sketch with
power iterations, then recover the spectrum from a small projected factor:

1. draw a Gaussian probe ``Omega`` of width ``probe_rank + oversample``
2. ``Y = M @ Omega``, followed by ``power_iters`` rounds of multiplying by
   ``M.T`` and ``M`` (orthonormalizing after every half-step, which spans the
   same subspace as the raw power product but keeps trailing directions from
   underflowing)
3. thin QR of ``Y`` gives the range basis ``Q``
4. the small matrix ``B = Q.T @ M`` is factorized exactly; its singular
   values approximate the leading spectrum, and the bases map back through
   ``Q``.

One pass over ``M`` costs O(m*n*(probe_rank + oversample)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg

__all__ = ["SpectralConfig", "SpectralEstimate", "estimate_spectrum"]

MAX_POWER_ITERS = 8


@dataclass(frozen=True)
class SpectralConfig:
    """Knobs for the randomized estimator.

    ``power_iters`` counts full M*M.T applications after the initial sketch;
    0 means sketch-only. Values above MAX_POWER_ITERS are rejected: extra
    passes past that point buy nothing at double precision.
    """

    probe_rank: int
    oversample: int = 8
    power_iters: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.probe_rank < 1:
            raise ValueError(f"probe_rank must be >= 1, got {self.probe_rank}")
        if self.oversample < 0:
            raise ValueError(f"oversample must be >= 0, got {self.oversample}")
        if not 0 <= self.power_iters <= MAX_POWER_ITERS:
            raise ValueError(
                f"power_iters must be in [0, {MAX_POWER_ITERS}], got {self.power_iters}"
            )


@dataclass(frozen=True)
class SpectralEstimate:
    """Leading singular values plus orthonormal subspace bases.

    ``sigmas`` is non-increasing with length ``probe_rank``; ``u_basis`` is
    m x probe_rank and ``v_basis`` n x probe_rank, both column-orthonormal.
    """

    sigmas: np.ndarray
    u_basis: np.ndarray
    v_basis: np.ndarray


def estimate_spectrum(m_mat: np.ndarray, cfg: SpectralConfig) -> SpectralEstimate:
    """Estimate the leading ``cfg.probe_rank`` singular triplets of ``m_mat``.

    Deterministic for a fixed ``cfg.seed``. Raises ``ValueError`` when the
    probe is wider than ``min(m, n)``.
    """
    mat = np.asarray(m_mat, dtype=float)
    if mat.ndim != 2:
        raise ValueError("estimate_spectrum expects a 2-D matrix")
    m, n = mat.shape
    width = cfg.probe_rank + cfg.oversample
    if width > min(m, n):
        raise ValueError(
            f"probe_rank + oversample = {width} exceeds min(m, n) = {min(m, n)}"
        )

    omega = linalg.gaussian(n, width, cfg.seed)
    y = linalg.matmul(mat, omega)
    for _ in range(cfg.power_iters):
        y = linalg.orthonormalize(y)
        z = linalg.orthonormalize(linalg.matmul(mat.T, y))
        y = linalg.matmul(mat, z)

    q = linalg.orthonormalize(y)
    b = linalg.matmul(q.T, mat)  # width x n, small regardless of m
    u_small, sigmas, v = linalg.exact_svd(b)

    r = cfg.probe_rank
    return SpectralEstimate(
        sigmas=sigmas[:r].copy(),
        u_basis=linalg.matmul(q, u_small[:, :r]),
        v_basis=v[:, :r].copy(),
    )
