"""Golden wire vectors: fixed payloads checked into the repo.

Decoding these byte-for-byte on any platform guards the wire format against
accidental drift (endianness, header layout, packing order). The CLI's
``goldens`` subcommand emits or verifies them; the test suite pins their
exact bytes and decoded values.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import wire
from .oasa import LowRankFactors

__all__ = ["golden_payloads", "emit_goldens", "verify_goldens"]


def golden_payloads() -> dict[str, bytes]:
    """The canonical payload set, one per format tag. Keys are file stems."""
    lowrank = LowRankFactors(
        p_mat=np.array([[1.5], [-2.25], [0.5]]),
        q_mat=np.array([[0.6], [0.8]]),
        rank=1,
    )
    topk = wire.TopkPayload(
        m=2,
        n=2,
        indices=np.array([1, 2], dtype=np.int64),
        values=np.array([-7.0, 5.0]),
    )
    quant = wire.QuantPayload(
        m=2,
        n=3,
        bits=4,
        scale=1.0,
        codes=np.array([0, 7, 14, 3, 10, 5], dtype=np.int64),
    )
    return {
        "lowrank_3x2_r1": wire.encode(lowrank),
        "topk_2x2_k2": wire.encode(topk),
        "quant_2x3_b4": wire.encode(quant),
    }


def emit_goldens(directory: str | Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for stem, payload in golden_payloads().items():
        path = directory / f"{stem}.bin"
        path.write_bytes(payload)
        written.append(path)
    return written


def verify_goldens(directory: str | Path) -> list[str]:
    """Compare on-disk vectors against the canonical set.

    Returns a list of problems, empty when everything matches. Each stored
    vector must be byte-identical and must decode without error.
    """
    directory = Path(directory)
    problems = []
    for stem, expected in golden_payloads().items():
        path = directory / f"{stem}.bin"
        if not path.exists():
            problems.append(f"{path}: missing")
            continue
        actual = path.read_bytes()
        if actual != expected:
            problems.append(f"{path}: differs from canonical bytes")
            continue
        try:
            wire.decode(actual)
        except wire.WireError as exc:  # pragma: no cover - canonical bytes decode
            problems.append(f"{path}: does not decode: {exc}")
    return problems
