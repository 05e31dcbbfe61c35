"""Compressors behind one interface: the adaptive low-rank path plus the
reference schemes it is benchmarked against.

Variants
--------
``nsc``
    Rank selection (energy coverage x bandwidth x cap) followed by the
    alternating-subspace compressor, with optional residual feedback and
    warm-started bases.
``randtopk``
    Magnitude top-k sparsification with a slice of the budget spent on
    uniformly sampled non-top entries.
``quant``
    Stochastic uniform quantization to a symmetric ``2**bits - 1``-level
    lattice, one float32 scale per matrix.
``fixedrank``
    The alternating-subspace compressor at a fixed rank and iteration
    count, no rank adaptation and no error feedback.

The shared contract: ``compress(mat, byte_budget, *, seed, stream=None)``
returns encoded bytes whose *body* (everything after the fixed 20-byte
header, which is link framing) fits ``byte_budget``; ``decompress`` returns
a matrix of the original shape with finite entries. All variants are
deterministic given their seed. Baseline variants are faithful-in-spirit
simplifications of the published schemes, not reproductions.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from . import linalg, oasa, wire
from .oasa import ErrorState, OasaConfig
from .rank_select import BudgetError, RankPolicy, select_rank
from .spectral import SpectralConfig

__all__ = [
    "StreamState",
    "Compressor",
    "NscCompressor",
    "RandTopkCompressor",
    "QuantCompressor",
    "FixedRankCompressor",
    "randtopk_compress",
    "quant_compress",
    "fixedrank_compress",
    "decode_to_matrix",
    "make_compressor",
    "VARIANTS",
]


@dataclass
class StreamState:
    """Per-(endpoint, tensor) memory a compressor may carry across rounds:
    the residual feedback matrix and the previous right basis."""

    error: ErrorState | None = None
    prev_q: np.ndarray | None = None

    def ensure_error(self, rows: int, cols: int) -> ErrorState:
        if self.error is None:
            self.error = ErrorState(rows, cols)
        elif self.error.shape != (rows, cols):
            raise ValueError(f"stream error state is {self.error.shape}, input is {(rows, cols)}")
        return self.error


def decode_to_matrix(payload: bytes) -> np.ndarray:
    """Decode any variant's payload to the dense m x n matrix it describes."""
    decoded = wire.decode(payload)
    if isinstance(decoded, oasa.LowRankFactors):
        return oasa.decompress(decoded)
    return decoded.to_matrix()


class Compressor:
    """Interface shared by every variant."""

    name: str = "?"

    def compress(self, mat: np.ndarray, byte_budget: int, *, seed: int, stream: StreamState | None = None) -> bytes:
        raise NotImplementedError

    def decompress(self, payload: bytes) -> np.ndarray:
        return decode_to_matrix(payload)


def randtopk_compress(m_mat: np.ndarray, byte_budget: int, random_frac: float, seed: int) -> bytes:
    """Keep the largest-magnitude entries plus a random slice of the rest.

    ``k`` is the largest count with ``8k <= byte_budget`` (8 bytes per
    index/value pair), of which ``ceil((1 - random_frac) * k)`` are chosen by
    magnitude (ties broken toward the lower flat index) and the remainder
    uniformly from the non-top positions.
    """
    mat = np.asarray(m_mat, dtype=float)
    if byte_budget < 8:
        raise BudgetError(f"byte_budget={byte_budget} below one 8-byte (index, value) pair")
    if not 0.0 <= random_frac <= 1.0:
        raise ValueError(f"random_frac must lie in [0, 1], got {random_frac}")
    m, n = mat.shape
    flat = mat.ravel()
    k = min(byte_budget // 8, flat.size)

    n_top = math.ceil((1.0 - random_frac) * k)
    by_magnitude = np.argsort(-np.abs(flat), kind="stable")
    chosen = by_magnitude[:n_top]
    n_rand = k - n_top
    if n_rand > 0:
        pool = by_magnitude[n_top:]
        rng = np.random.default_rng(seed)
        chosen = np.concatenate([chosen, rng.choice(pool, size=n_rand, replace=False)])

    chosen = np.sort(chosen)
    payload = wire.TopkPayload(m=m, n=n, indices=chosen, values=flat[chosen])
    return wire.encode(payload)


def quant_compress(m_mat: np.ndarray, bits: int, seed: int) -> bytes:
    """Stochastically round entries to a symmetric uniform lattice.

    The lattice has ``2**bits - 1`` levels spanning ``[-s, s]`` with
    ``s = max |entry|`` (held in float32 so both ends agree exactly); the odd
    level count makes zero a lattice point. Each entry rounds to one of its
    two neighboring levels with probability proportional to proximity, so the
    quantizer is unbiased and the per-entry error is below one level spacing.
    """
    mat = np.asarray(m_mat, dtype=float)
    if not 2 <= bits <= 8:
        raise ValueError(f"bits must be in 2..8, got {bits}")
    m, n = mat.shape
    scale = float(np.float32(np.max(np.abs(mat))) if mat.size else 0.0)
    levels = (1 << bits) - 1
    if scale == 0.0:
        codes = np.zeros(m * n, dtype=np.int64)
    else:
        spacing = 2.0 * scale / (levels - 1)
        position = (mat.ravel() + scale) / spacing
        lower = np.floor(position)
        frac = position - lower
        rng = np.random.default_rng(seed)
        codes = (lower + (rng.random(position.size) < frac)).astype(np.int64)
        codes = np.clip(codes, 0, levels - 1)
    return wire.encode(wire.QuantPayload(m=m, n=n, bits=bits, scale=scale, codes=codes))


def fixedrank_compress(m_mat: np.ndarray, r_f: int, iters: int, seed: int) -> bytes:
    """Fixed-rank alternating-subspace compression: no adaptation, no
    residual feedback, a fixed iteration count. Wire format identical to the
    adaptive path."""
    cfg = OasaConfig(max_iters=iters, min_iters=iters, seed=seed)
    result = oasa.compress(np.asarray(m_mat, dtype=float), r_f, cfg, ecl_enabled=False)
    return wire.encode(result.factors)


class RandTopkCompressor(Compressor):
    name = "randtopk"

    def __init__(self, random_frac: float = 0.1):
        self.random_frac = random_frac

    def compress(self, mat, byte_budget, *, seed, stream=None):
        return randtopk_compress(mat, byte_budget, self.random_frac, seed)


class QuantCompressor(Compressor):
    """``bits=None`` picks the widest width in 2..8 whose body fits the
    budget; a fixed width is used as-is and validated against the budget."""

    name = "quant"

    def __init__(self, bits: int | None = None):
        if bits is not None and not 2 <= bits <= 8:
            raise ValueError(f"bits must be in 2..8, got {bits}")
        self.bits = bits

    @staticmethod
    def body_len(m: int, n: int, bits: int) -> int:
        return 4 + (bits * m * n + 7) // 8

    def compress(self, mat, byte_budget, *, seed, stream=None):
        mat = np.asarray(mat, dtype=float)
        m, n = mat.shape
        if self.bits is not None:
            bits = self.bits
            if self.body_len(m, n, bits) > byte_budget:
                raise BudgetError(
                    f"quant body at bits={bits} needs {self.body_len(m, n, bits)} bytes, budget {byte_budget}"
                )
        else:
            bits = max((b for b in range(2, 9) if self.body_len(m, n, b) <= byte_budget), default=0)
            if bits == 0:
                raise BudgetError(
                    f"budget {byte_budget} below smallest quant body {self.body_len(m, n, 2)}"
                )
        return quant_compress(mat, bits, seed)


class FixedRankCompressor(Compressor):
    """Fixed target rank, truncated only when the budget cannot carry it."""

    name = "fixedrank"

    def __init__(self, rank: int = 6, iters: int = 10):
        if rank < 1 or iters < 1:
            raise ValueError("rank and iters must be >= 1")
        self.rank = rank
        self.iters = iters

    def compress(self, mat, byte_budget, *, seed, stream=None):
        mat = np.asarray(mat, dtype=float)
        m, n = mat.shape
        r_budget = byte_budget // (4 * (m + n))
        r = min(self.rank, r_budget, min(m, n))
        if r < 1:
            raise BudgetError(f"budget {byte_budget} below rank-1 payload {4 * (m + n)} bytes")
        return fixedrank_compress(mat, r, self.iters, seed)


class NscCompressor(Compressor):
    """The adaptive path: bandwidth-aware rank selection feeding the
    alternating-subspace compressor.

    The right basis is warm-started from the previous round's factors when
    the stream carries one (and ``warm_start`` is on), otherwise from the
    right basis of this round's spectral estimate. Residual feedback streams
    require a ``stream`` argument to hold their state.
    """

    name = "nsc"

    def __init__(
        self,
        eta: float = 0.95,
        r_cap: int = 64,
        oasa_cfg: OasaConfig = OasaConfig(),
        spectral_cfg: SpectralConfig = SpectralConfig(probe_rank=1),
        *,
        ecl_enabled: bool = True,
        warm_start: bool = True,
    ):
        self.eta = eta
        self.r_cap = r_cap
        self.oasa_cfg = oasa_cfg
        self.spectral_cfg = spectral_cfg
        self.ecl_enabled = ecl_enabled
        self.warm_start = warm_start

    def compress(self, mat, byte_budget, *, seed, stream=None):
        mat = np.asarray(mat, dtype=float)
        m, n = mat.shape
        policy = RankPolicy(eta=self.eta, b_max=byte_budget, r_cap=min(self.r_cap, min(m, n)))
        spectral_cfg = dataclasses.replace(self.spectral_cfg, seed=linalg.derive_seed(seed, 1))
        decision, estimate = select_rank(mat, policy, spectral_cfg, return_estimate=True)
        return self._compress_with_basis(mat, decision.r_final, estimate.v_basis, seed, stream)

    def compress_at_rank(self, mat, byte_budget, rank: int, *, seed, stream=None):
        """Compress at an externally fixed rank (e.g. reusing the rank the
        opposite direction selected), still clamped to budget and shape."""
        mat = np.asarray(mat, dtype=float)
        m, n = mat.shape
        r_budget = byte_budget // (4 * (m + n))
        if r_budget < 1:
            raise BudgetError(f"budget {byte_budget} below rank-1 payload {4 * (m + n)} bytes")
        r = min(rank, r_budget, min(m, n))
        return self._compress_with_basis(mat, r, None, seed, stream)

    def _compress_with_basis(self, mat, r, v_basis, seed, stream):
        m, n = mat.shape
        if not self.warm_start:
            q0 = None  # cold start: orthonormalized random draw inside compress
        elif stream is not None and stream.prev_q is not None:
            q0 = oasa.resize_basis(stream.prev_q, r, linalg.derive_seed(seed, 2))
        elif v_basis is not None:
            q0 = oasa.resize_basis(v_basis, r, linalg.derive_seed(seed, 3))
        else:
            q0 = None

        state = None
        if self.ecl_enabled:
            if stream is None:
                raise ValueError("residual feedback needs a StreamState")
            state = stream.ensure_error(m, n)
        cfg = dataclasses.replace(self.oasa_cfg, seed=linalg.derive_seed(seed, 4))
        result = oasa.compress(mat, r, cfg, state, ecl_enabled=self.ecl_enabled, prev_q=q0)
        if self.warm_start and stream is not None:
            stream.prev_q = result.factors.q_mat
        return wire.encode(result.factors)


VARIANTS = {
    "nsc": NscCompressor,
    "randtopk": RandTopkCompressor,
    "quant": QuantCompressor,
    "fixedrank": FixedRankCompressor,
}


def make_compressor(variant: str, **params) -> Compressor:
    try:
        cls = VARIANTS[variant]
    except KeyError:
        raise ValueError(f"unknown compressor variant {variant!r}; pick from {sorted(VARIANTS)}")
    return cls(**params)
