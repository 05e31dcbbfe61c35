"""Alternating orthogonal subspace compression with residual error feedback.

The compressor approximates a matrix ``M`` by rank-``r`` factors ``(P, Q)``
without a full SVD. Starting from an orthonormal ``Q``, each iteration
alternates

    P <- orthonormalize(M' @ Q)
    Q <- orthonormalize(M'.T @ P)

where ``M'`` is the input plus the stream's accumulated residual when error
feedback is on. Orthonormalizing both half-steps keeps the subspaces stable,
but a pair of orthonormal factors cannot carry magnitudes, so the factors
actually returned are ``(M' @ Q, Q)``: the projection of ``M'`` onto
``span(Q)``, which is the best approximation available within that span and
converges to the optimal rank-``r`` approximation in the Frobenius norm.

Iteration stops early once the relative residual stops improving: an
improvement below ``stall_tol`` bumps a stagnation counter, a larger one
resets it, and the loop exits when the counter passes ``patience`` (after
``min_iters``). The factors returned always belong to the best iterate
observed, never a later, worse one.

After each compression the stream's residual state is refreshed as
``E <- beta * E + (M - M_hat)``, reinjecting what this round truncated into
the next round's input.

Per-iteration cost is O(m*n*r + (m+n)*r**2) multiply-accumulates against
O(min(m,n)**3) for a truncated SVD.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg

__all__ = ["OasaConfig", "ErrorState", "LowRankFactors", "CompressResult", "compress", "decompress"]


@dataclass(frozen=True)
class OasaConfig:
    """Iteration budget, error-feedback momentum and early-stopping knobs.

    ``feedback_on_compensated`` switches the residual update to
    ``E <- beta*E + ((M + E) - M_hat)``, i.e. the uncompensated part of the
    compensated input is retained in full rather than only through ``beta``.
    Off by default; exposed for experimentation.
    """

    max_iters: int = 10
    beta: float = 0.9
    min_iters: int = 2
    patience: int = 2
    stall_tol: float = 1e-3
    seed: int = 0
    feedback_on_compensated: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not 0 <= self.min_iters <= self.max_iters:
            raise ValueError("need 0 <= min_iters <= max_iters")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")
        if self.stall_tol <= 0.0:
            raise ValueError(f"stall_tol must be positive, got {self.stall_tol}")


class ErrorState:
    """Accumulated compression residual for one (endpoint, tensor) stream.

    Holds the matrix added to the next input when error feedback is enabled.
    One instance per stream; a call to :func:`compress` mutates it, so streams
    must not share instances.
    """

    def __init__(self, rows: int, cols: int):
        if rows < 1 or cols < 1:
            raise ValueError("ErrorState needs positive dimensions")
        self.shape = (rows, cols)
        self.e_mat = np.zeros((rows, cols))

    def reset(self) -> None:
        """Zero the residual (fresh epoch or stream reuse)."""
        self.e_mat[:] = 0.0


@dataclass(frozen=True)
class LowRankFactors:
    """Factor pair: ``p_mat`` (m x r) carries magnitudes, ``q_mat`` (n x r)
    is column-orthonormal. The reconstruction is ``p_mat @ q_mat.T``."""

    p_mat: np.ndarray
    q_mat: np.ndarray
    rank: int

    @property
    def shape(self) -> tuple[int, int]:
        return (self.p_mat.shape[0], self.q_mat.shape[0])


@dataclass(frozen=True)
class CompressResult:
    factors: LowRankFactors
    iters_used: int
    final_residual: float
    residual_history: list[float] = field(default_factory=list, repr=False)


def _relative_residual(total_sq: float, coef: np.ndarray, norm_m: float) -> float:
    # ||M' - M'QQ^T||_F^2 = ||M'||_F^2 - ||M'Q||_F^2 for orthonormal Q; the
    # subtraction floors at 0 where cancellation would go negative.
    resid_sq = max(total_sq - linalg.fro_norm(coef) ** 2, 0.0)
    return float(np.sqrt(resid_sq)) / norm_m


def compress(
    m_mat: np.ndarray,
    r: int,
    cfg: OasaConfig,
    state: ErrorState | None = None,
    *,
    ecl_enabled: bool = True,
    prev_q: np.ndarray | None = None,
) -> CompressResult:
    """Compress ``m_mat`` to rank-``r`` factors.

    ``state`` carries the stream's residual feedback; it is required (and
    mutated) when ``ecl_enabled`` is true and ignored otherwise. ``prev_q``
    warm-starts the right basis from an earlier round of the same stream;
    omitted, the start is an orthonormalized Gaussian draw from ``cfg.seed``.
    """
    mat = np.asarray(m_mat, dtype=float)
    if mat.ndim != 2:
        raise ValueError("compress expects a 2-D matrix")
    m, n = mat.shape
    if not 1 <= r <= min(m, n):
        raise ValueError(f"rank {r} outside [1, {min(m, n)}] for a {m}x{n} matrix")
    if not np.all(np.isfinite(mat)):
        raise ValueError("compress input contains non-finite entries")
    if ecl_enabled:
        if state is None:
            raise ValueError("ecl_enabled requires an ErrorState")
        if state.shape != (m, n):
            raise ValueError(f"ErrorState shape {state.shape} does not match input {m}x{n}")

    work = mat + state.e_mat if ecl_enabled else mat
    norm_work = linalg.fro_norm(work)
    total_sq = norm_work**2
    denom = norm_work if norm_work > 0.0 else 1.0

    if prev_q is not None:
        q = np.asarray(prev_q, dtype=float)
        if q.shape != (n, r):
            raise ValueError(f"prev_q must be {n}x{r}, got {q.shape}")
    else:
        q = linalg.orthonormalize(linalg.gaussian(n, r, cfg.seed))

    best_resid = np.inf
    best_coef = None
    best_q = q
    stall = 0
    history: list[float] = []
    iters = 0

    for t in range(1, cfg.max_iters + 1):
        iters = t
        p = linalg.orthonormalize(linalg.matmul(work, q))
        q = linalg.orthonormalize(linalg.matmul(work.T, p))
        coef = linalg.matmul(work, q)
        resid = _relative_residual(total_sq, coef, denom)
        history.append(resid)

        improvement = best_resid - resid
        if resid < best_resid:
            best_resid = resid
            best_coef = coef
            best_q = q
        if improvement < cfg.stall_tol:
            stall += 1
        else:
            stall = 0
        if stall > cfg.patience and t >= cfg.min_iters:
            break

    if best_coef is None:  # max_iters >= 1 guarantees at least one iterate
        raise AssertionError("no iterate recorded")

    factors = LowRankFactors(p_mat=best_coef, q_mat=best_q, rank=r)
    if ecl_enabled:
        m_hat = linalg.matmul(factors.p_mat, factors.q_mat.T)
        reference = work if cfg.feedback_on_compensated else mat
        state.e_mat = cfg.beta * state.e_mat + (reference - m_hat)
    return CompressResult(
        factors=factors,
        iters_used=iters,
        final_residual=float(best_resid),
        residual_history=history,
    )


def decompress(f: LowRankFactors) -> np.ndarray:
    """Reconstruct the m x n matrix ``p_mat @ q_mat.T``."""
    return linalg.matmul(f.p_mat, f.q_mat.T)


def resize_basis(q: np.ndarray, r: int, seed: int) -> np.ndarray:
    """Adapt an orthonormal basis to a new column count.

    Truncates when shrinking; pads with orthonormalized random directions
    when growing. Used to carry a warm start across rounds whose selected
    ranks differ.
    """
    q = np.asarray(q, dtype=float)
    n, r_old = q.shape
    r = min(r, n)
    if r <= r_old:
        return q[:, :r].copy()
    extra = linalg.gaussian(n, r - r_old, seed)
    return linalg.orthonormalize(np.hstack([q, extra]))
