"""Dense matrix primitives shared by every other module.

Matrices are plain 2-D float64 ``numpy.ndarray`` objects in row-major
(logical) order. All internal arithmetic runs in double precision; single
precision appears only at the wire boundary (see :mod:`nscsl.wire`).

Everything here is a pure function of its arguments. The rank-repair
randomness inside :func:`orthonormalize` draws from a generator with a fixed
seed, so even degenerate inputs map to a deterministic output.

A process-global multiply-accumulate counter instruments ``matmul``,
``orthonormalize`` and ``fro_norm`` so tests can assert complexity scaling;
it costs one integer add per call and is ignored outside the tests.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "SVD_ORACLE_CAP",
    "OracleCapError",
    "matmul",
    "orthonormalize",
    "gaussian",
    "exact_svd",
    "fro_norm",
    "random_orthonormal",
    "planted_matrix",
    "powerlaw_sigmas",
    "geometric_sigmas",
    "derive_seed",
    "mac_count",
    "reset_mac_count",
]

# exact_svd is an oracle for tests/benchmarks, not a production path; the cap
# keeps it honest.
SVD_ORACLE_CAP = 512

# Fixed generator seed for repairing rank-deficient columns: keeps
# orthonormalize pure (same input -> same output).
_REPAIR_SEED = 0x0C0FFEE

# Columns whose residual after projection falls below this fraction of their
# original norm are treated as dependent and replaced.
_RANK_TOL = 1e-10

_MACS = 0


class OracleCapError(ValueError):
    """Raised when exact_svd is asked for a matrix beyond its size cap."""


def reset_mac_count() -> None:
    global _MACS
    _MACS = 0


def mac_count() -> int:
    """Multiply-accumulate operations recorded since the last reset."""
    return _MACS


def _add_macs(n: int) -> None:
    global _MACS
    _MACS += int(n)


def _require_2d(a: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got ndim={a.ndim}")
    return a


def require_finite(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Reject NaN/Inf entries (the construction invariant for external data)."""
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with double-precision accumulation.

    Raises ``ValueError`` on an inner-dimension mismatch.
    """
    a = _require_2d(a, "a")
    b = _require_2d(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ValueError(
            f"dimension mismatch: ({a.shape[0]}x{a.shape[1]}) @ ({b.shape[0]}x{b.shape[1]})"
        )
    _add_macs(a.shape[0] * a.shape[1] * b.shape[1])
    return a @ b


def fro_norm(a: np.ndarray) -> float:
    """Frobenius norm: sqrt of the sum of squared entries, double accumulation."""
    a = np.asarray(a, dtype=float)
    _add_macs(a.size)
    flat = a.ravel()
    return float(np.sqrt(np.dot(flat, flat)))


def gaussian(rows: int, cols: int, seed: int) -> np.ndarray:
    """i.i.d. standard-normal matrix, bit-identical for identical seeds."""
    if rows < 1 or cols < 1:
        raise ValueError(f"gaussian needs rows, cols >= 1, got {rows}x{cols}")
    if not 0 <= int(seed) < 2**64:
        raise ValueError("seed must fit an unsigned 64-bit integer")
    return np.random.default_rng(int(seed)).standard_normal((rows, cols))


def _project_out(prefix: np.ndarray, v: np.ndarray) -> np.ndarray:
    # Two projection passes: the re-orthogonalization recovers the digits a
    # single pass loses on ill-conditioned columns ("twice is enough").
    for _ in range(2):
        v = v - prefix @ (prefix.T @ v)
    return v


def orthonormalize(a: np.ndarray) -> np.ndarray:
    """Column-orthonormal basis with the same span as ``a``.

    Gram-Schmidt, column by column, with one re-orthogonalization pass per
    column. Columns that turn out dependent (or all-zero) are replaced by
    random directions orthogonalized against the basis built so far, so the
    result always has full column rank: dead activation blocks keep iterating
    instead of aborting.

    Requires ``rows >= cols``.
    """
    a = _require_2d(a, "a")
    m, k = a.shape
    if m < k:
        raise ValueError(f"orthonormalize needs rows >= cols, got {m}x{k}")
    _add_macs(2 * m * k * max(k - 1, 0) + m * k)
    q = np.empty((m, k))
    rng = None
    for j in range(k):
        col_norm = float(np.linalg.norm(a[:, j]))
        v = _project_out(q[:, :j], a[:, j].copy())
        nrm = float(np.linalg.norm(v))
        while nrm <= _RANK_TOL * col_norm or nrm == 0.0:
            if rng is None:
                rng = np.random.default_rng(_REPAIR_SEED)
            v = _project_out(q[:, :j], rng.standard_normal(m))
            nrm = float(np.linalg.norm(v))
            col_norm = 0.0  # any nonzero residual of a random draw is accepted
        q[:, j] = v / nrm
    return q


def exact_svd(a: np.ndarray, *, cap: int = SVD_ORACLE_CAP) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Full SVD ``a = U @ diag(S) @ V.T`` for small matrices.

    Oracle for tests and benchmarks only; refuses matrices whose smaller
    dimension exceeds ``cap`` so it cannot sneak into a production path.
    Returns ``(U, S, V)`` with ``S`` non-increasing and ``U``, ``V``
    column-orthonormal.
    """
    a = _require_2d(a, "a")
    if min(a.shape) > cap:
        raise OracleCapError(
            f"exact_svd capped at min-dimension {cap}, got {a.shape[0]}x{a.shape[1]}"
        )
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    return u, s, vt.T


def random_orthonormal(dim: int, k: int, seed: int) -> np.ndarray:
    """Haar-ish random basis: orthonormalized Gaussian, deterministic per seed."""
    return orthonormalize(gaussian(dim, k, seed))


def derive_seed(seed: int, *tags: int) -> int:
    """Stable 64-bit sub-seed for (seed, tags); independent streams per tag."""
    ss = np.random.SeedSequence([int(seed), *[int(t) & 0xFFFFFFFF for t in tags]])
    return int(ss.generate_state(1, np.uint64)[0])


def planted_matrix(m: int, n: int, sigmas: np.ndarray, seed: int) -> np.ndarray:
    """Matrix with a known singular spectrum: ``U @ diag(sigmas) @ V.T``.

    ``U`` and ``V`` are independent random orthonormal bases, so ``sigmas``
    (non-increasing, non-negative) is exactly the singular spectrum. This is
    the ground-truth construction used throughout the tests and benchmarks.
    """
    sigmas = np.asarray(sigmas, dtype=float)
    k = sigmas.size
    if k > min(m, n):
        raise ValueError("more sigmas than min(m, n)")
    u = random_orthonormal(m, k, derive_seed(seed, 1))
    v = random_orthonormal(n, k, derive_seed(seed, 2))
    return (u * sigmas) @ v.T


def powerlaw_sigmas(count: int, exponent: float = 2.0, sigma1: float = 1.0) -> np.ndarray:
    """Power-law spectrum sigma_i = sigma1 * i**-exponent, i = 1..count."""
    i = np.arange(1, count + 1, dtype=float)
    return sigma1 * i**-exponent


def geometric_sigmas(count: int, ratio: float = 0.5) -> np.ndarray:
    """Geometric spectrum sigma_i = ratio**i, i = 1..count."""
    return ratio ** np.arange(1, count + 1, dtype=float)
