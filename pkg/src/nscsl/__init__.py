"""Bandwidth-aware low-rank compression of activations and gradients, with a
split-learning simulator for benchmarking it against sparsification and
quantization baselines under modeled links."""

from .baselines import (
    Compressor,
    FixedRankCompressor,
    NscCompressor,
    QuantCompressor,
    RandTopkCompressor,
    StreamState,
    make_compressor,
)
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .oasa import CompressResult, ErrorState, LowRankFactors, OasaConfig, compress, decompress
from .rank_select import (
    BudgetError,
    RankDecision,
    RankPolicy,
    rank_for_bandwidth,
    rank_for_energy,
    select_rank,
)
from .simulator import LinkModel, RoundMetrics, run_experiment, run_round
from .spectral import SpectralConfig, SpectralEstimate, estimate_spectrum
from .wire import WireError, decode, encode

__version__ = "0.1.0"

__all__ = [
    "BudgetError",
    "CompressResult",
    "Compressor",
    "ConfigError",
    "ErrorState",
    "ExperimentConfig",
    "FixedRankCompressor",
    "LinkModel",
    "LowRankFactors",
    "NscCompressor",
    "OasaConfig",
    "QuantCompressor",
    "RandTopkCompressor",
    "RankDecision",
    "RankPolicy",
    "RoundMetrics",
    "SpectralConfig",
    "SpectralEstimate",
    "StreamState",
    "WireError",
    "compress",
    "decode",
    "decompress",
    "encode",
    "estimate_spectrum",
    "load_config",
    "make_compressor",
    "parse_config",
    "rank_for_bandwidth",
    "rank_for_energy",
    "run_experiment",
    "run_round",
    "select_rank",
]
