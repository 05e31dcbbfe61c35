"""Experiment configuration: a flat ``key = value`` text format.

One assignment per line; ``#`` starts a comment; blank lines are ignored.
Booleans are ``true``/``false``. Every key has a default, so an empty file
is a valid experiment. Unknown keys and malformed values raise
:class:`ConfigError` naming the line and key.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "describe_schema",
    "default_ablation_config",
    "apply_ablation",
]

DEFAULT_SEED = 1729  # documented default: reported numbers reproduce verbatim


class ConfigError(ValueError):
    """Bad experiment configuration (unknown key, bad value, bad combination)."""


@dataclass
class ExperimentConfig:
    # federation / schedule
    n_clients: int = 5
    rounds: int = 100
    batch_size: int = 128
    learning_rate: float = 0.05
    eval_every: int = 1
    seed: int = DEFAULT_SEED

    # link and per-tensor byte budget: b_max = bandwidth_bps * budget_slot_s / 8
    bandwidth_bps: float = 100e6
    latency_s: float = 0.05
    budget_slot_s: float = 0.05

    # rank selection
    eta: float = 0.95
    r_cap: int = 8

    # subspace iteration / error feedback
    beta: float = 0.9
    max_iters: int = 10
    min_iters: int = 2
    patience: int = 2
    stall_tol: float = 1e-3
    feedback_on_compensated: bool = False

    # spectral estimation
    oversample: int = 8
    power_iters: int = 2

    # compressor variant and baseline knobs
    compressor: str = "nsc"
    random_frac: float = 0.1
    quant_bits: int = 0  # 0 = widest width that fits the budget
    fixed_rank: int = 6

    # ablation switches
    no_ecl: bool = False
    single_iteration: bool = False
    warm_start: bool = True
    shared_rank: bool = False

    # synthetic task
    d_in: int = 20
    hidden: int = 12
    hidden2: int = 16
    classes: int = 4
    samples_per_client: int = 512
    eval_samples: int = 1024
    separation: float = 3.0

    # output CSV path ("" = stdout summary only)
    out: str = ""

    @property
    def b_max(self) -> int:
        """Per-tensor byte budget implied by the link and the slot length."""
        return max(1, int(self.bandwidth_bps * self.budget_slot_s / 8.0))

    def validate(self) -> "ExperimentConfig":
        checks = [
            (self.n_clients >= 1, "n_clients must be >= 1"),
            (self.rounds >= 1, "rounds must be >= 1"),
            (self.batch_size >= 1, "batch_size must be >= 1"),
            (self.eval_every >= 1, "eval_every must be >= 1"),
            (self.bandwidth_bps > 0, "bandwidth_bps must be positive"),
            (self.latency_s >= 0, "latency_s must be >= 0"),
            (self.budget_slot_s > 0, "budget_slot_s must be positive"),
            (0.0 < self.eta < 1.0, "eta must lie in (0, 1)"),
            (self.r_cap >= 1, "r_cap must be >= 1"),
            (0.0 <= self.beta <= 1.0, "beta must lie in [0, 1]"),
            (self.max_iters >= 1, "max_iters must be >= 1"),
            (0 <= self.min_iters <= self.max_iters, "need 0 <= min_iters <= max_iters"),
            (self.patience >= 1, "patience must be >= 1"),
            (self.stall_tol > 0, "stall_tol must be positive"),
            (self.oversample >= 0, "oversample must be >= 0"),
            (0 <= self.power_iters <= 8, "power_iters must be in 0..8"),
            (self.compressor in ("nsc", "randtopk", "quant", "fixedrank"), f"unknown compressor {self.compressor!r}"),
            (0.0 <= self.random_frac <= 1.0, "random_frac must lie in [0, 1]"),
            (self.quant_bits == 0 or 2 <= self.quant_bits <= 8, "quant_bits must be 0 or in 2..8"),
            (self.fixed_rank >= 1, "fixed_rank must be >= 1"),
            (self.classes >= 2, "classes must be >= 2"),
            (self.d_in >= 1 and self.hidden >= 1 and self.hidden2 >= 1, "model dims must be >= 1"),
            (self.samples_per_client >= 1, "samples_per_client must be >= 1"),
            (self.eval_samples >= 1, "eval_samples must be >= 1"),
            (self.separation > 0, "separation must be positive"),
            (0 <= self.seed < 2**64, "seed must fit an unsigned 64-bit integer"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        return self


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _convert(key: str, raw: str, line_no: int):
    kind = _FIELD_TYPES[key]
    try:
        if kind == "bool":
            lowered = raw.lower()
            if lowered not in ("true", "false"):
                raise ValueError
            return lowered == "true"
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"line {line_no}: key {key!r}: expected {kind}, got {raw!r}") from None


def parse_config(text: str) -> ExperimentConfig:
    values = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {line.strip()!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {line_no}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {line_no}: duplicate key {key!r}")
        values[key] = _convert(key, raw, line_no)
    return ExperimentConfig(**values).validate()


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def default_ablation_config() -> ExperimentConfig:
    """Base experiment for the ablation comparisons.

    Tuned so compression is the binding constraint: a hard rank cap of 2 on
    the activation streams, a moderately separable task, and the full
    iteration budget actually spent (no early exit), so removing residual
    feedback or collapsing to a single iteration shows up in final accuracy.
    """
    return ExperimentConfig(
        rounds=80,
        n_clients=5,
        batch_size=64,
        learning_rate=0.05,
        eta=0.99,
        budget_slot_s=10.0,
        hidden=12,
        hidden2=16,
        r_cap=2,
        separation=2.5,
        samples_per_client=256,
        warm_start=False,
        min_iters=10,
        eval_every=4,
    )


def apply_ablation(cfg: ExperimentConfig, mode: str) -> ExperimentConfig:
    """Return a copy of ``cfg`` with one ablation switch applied."""
    from dataclasses import replace

    modes = {
        "full": {},
        "no_ecl": {"no_ecl": True},
        "single_iteration": {"single_iteration": True},
        "no_warm_start": {"warm_start": False},
    }
    if mode not in modes:
        raise ConfigError(f"unknown ablation mode {mode!r}; pick from {sorted(modes)}")
    return replace(cfg, **modes[mode]).validate()


def describe_schema() -> str:
    """One line per config key with its type and default, for --help."""
    lines = []
    for f in fields(ExperimentConfig):
        lines.append(f"  {f.name} ({f.type}, default {f.default!r})")
    return "\n".join(lines)
