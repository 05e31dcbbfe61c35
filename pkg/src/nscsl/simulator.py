"""Split-learning round simulator with a modeled link.

Each round walks every client through the four-stage exchange:

1. the client runs its front layers on a mini-batch,
2. the activation matrix is compressed (under the byte budget) and sent,
3. the server decompresses, finishes forward/backward, updates its own
   weights, compresses the per-client activation gradient and sends it back,
4. the client applies the received gradient to its front layers, and the
   stream's residual feedback is left updated for the next round.

Clients execute sequentially in id order (deterministic), but the reported
wall-clock time per round is the maximum over the clients' transfer chains,
matching a deployment where clients operate in parallel against one server.
Compute time is not modeled; only bytes move the clock.

Everything is deterministic for a fixed config seed: batches are contiguous
slices (with wraparound) indexed by round, and every compression event gets
a sub-seed derived from (seed, round, client, direction).
"""

from __future__ import annotations

import csv
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import linalg, model, wire
from .baselines import (
    Compressor,
    FixedRankCompressor,
    NscCompressor,
    QuantCompressor,
    RandTopkCompressor,
    StreamState,
)
from .config import ExperimentConfig
from .model import ClientParams, ServerParams, SyntheticTask
from .oasa import OasaConfig
from .rank_select import BudgetError, RankPolicy
from .spectral import SpectralConfig

__all__ = [
    "LinkModel",
    "ClientState",
    "ServerState",
    "RoundMetrics",
    "build_compressor",
    "init_simulation",
    "run_round",
    "run_experiment",
    "train_unsplit_reference",
    "write_metrics_csv",
    "CSV_COLUMNS",
]

CSV_COLUMNS = [
    "round",
    "loss",
    "eval_acc",
    "uplink_bytes",
    "downlink_bytes",
    "sim_time_s",
    "mean_rank",
    "mean_mse",
]

_UPLINK, _DOWNLINK = 0, 1


@dataclass(frozen=True)
class LinkModel:
    """Fixed-rate link: transfer time = latency + bits / bandwidth."""

    bandwidth_bps: float
    latency_s: float

    def __post_init__(self):
        if self.bandwidth_bps <= 0:
            raise ValueError("bandwidth_bps must be positive")
        if self.latency_s < 0:
            raise ValueError("latency_s must be >= 0")

    def transfer_time(self, nbytes: int) -> float:
        return self.latency_s + 8.0 * nbytes / self.bandwidth_bps


@dataclass
class ClientState:
    client_id: int
    params: ClientParams
    uplink: StreamState
    shard_x: np.ndarray
    shard_y: np.ndarray


@dataclass
class ServerState:
    params: ServerParams
    downlinks: dict[int, StreamState] = field(default_factory=dict)

    def downlink_for(self, client_id: int) -> StreamState:
        if client_id not in self.downlinks:
            self.downlinks[client_id] = StreamState()
        return self.downlinks[client_id]


@dataclass
class RoundMetrics:
    """Per-round measurements. ``ranks`` collects the selected rank of every
    factor payload that round; it stays empty (and ``mean_rank`` reads 0) for
    compressors whose payloads carry no rank."""

    round_index: int
    loss: float
    eval_acc: float
    uplink_bytes: list[int]
    downlink_bytes: list[int]
    sim_time_s: float
    ranks: list[int]
    mse_values: list[float]

    @property
    def total_uplink(self) -> int:
        return sum(self.uplink_bytes)

    @property
    def total_downlink(self) -> int:
        return sum(self.downlink_bytes)

    @property
    def mean_rank(self) -> float:
        return float(np.mean(self.ranks)) if self.ranks else 0.0

    @property
    def mean_mse(self) -> float:
        return float(np.mean(self.mse_values)) if self.mse_values else 0.0


def build_compressor(cfg: ExperimentConfig) -> Compressor:
    """Instantiate the configured variant with the config's knobs applied."""
    if cfg.compressor == "nsc":
        oasa_cfg = OasaConfig(
            max_iters=1 if cfg.single_iteration else cfg.max_iters,
            beta=cfg.beta,
            min_iters=min(cfg.min_iters, 1 if cfg.single_iteration else cfg.max_iters),
            patience=cfg.patience,
            stall_tol=cfg.stall_tol,
            feedback_on_compensated=cfg.feedback_on_compensated,
        )
        return NscCompressor(
            eta=cfg.eta,
            r_cap=cfg.r_cap,
            oasa_cfg=oasa_cfg,
            spectral_cfg=SpectralConfig(
                probe_rank=1, oversample=cfg.oversample, power_iters=cfg.power_iters
            ),
            ecl_enabled=not cfg.no_ecl,
            warm_start=cfg.warm_start,
        )
    if cfg.compressor == "randtopk":
        return RandTopkCompressor(random_frac=cfg.random_frac)
    if cfg.compressor == "quant":
        return QuantCompressor(bits=cfg.quant_bits or None)
    return FixedRankCompressor(rank=cfg.fixed_rank, iters=cfg.max_iters)


def init_simulation(cfg: ExperimentConfig) -> tuple[list[ClientState], ServerState, SyntheticTask]:
    task = model.make_synthetic_task(
        cfg.seed,
        cfg.n_clients,
        cfg.samples_per_client,
        cfg.d_in,
        cfg.classes,
        separation=cfg.separation,
        eval_samples=cfg.eval_samples,
    )
    clients = []
    for cid in range(cfg.n_clients):
        client_params, _ = model.init_params(
            cfg.d_in, cfg.hidden, cfg.hidden2, cfg.classes, linalg.derive_seed(cfg.seed, 31, cid)
        )
        x, y = task.shards[cid]
        clients.append(
            ClientState(client_id=cid, params=client_params, uplink=StreamState(), shard_x=x, shard_y=y)
        )
    _, server_params = model.init_params(
        cfg.d_in, cfg.hidden, cfg.hidden2, cfg.classes, linalg.derive_seed(cfg.seed, 32)
    )
    return clients, ServerState(params=server_params), task


def _batch_indices(round_index: int, batch_size: int, shard_size: int) -> np.ndarray:
    start = round_index * batch_size
    return (start + np.arange(batch_size)) % shard_size


def _lowrank_rank(payload: bytes) -> int | None:
    header = wire.peek_header(payload)
    return header.r_or_k if header.format_tag == wire.TAG_LOWRANK else None


def run_round(
    clients: list[ClientState],
    server: ServerState,
    link: LinkModel,
    compressor: Compressor,
    policy: RankPolicy,
    batch_size: int,
    *,
    learning_rate: float,
    round_index: int,
    seed: int,
    shared_rank: bool = False,
) -> RoundMetrics:
    """One training round over all clients; mutates client/server state.

    ``policy.b_max`` is the per-tensor byte budget for both directions. With
    ``shared_rank`` the downlink reuses the uplink's selected rank instead of
    re-running rank selection (only meaningful for the adaptive variant).
    A budget failure aborts the round with the offending stream named.
    """
    losses = []
    up_bytes, down_bytes = [], []
    ranks, mses = [], []
    slowest = 0.0

    for client in clients:
        cid = client.client_id
        idx = _batch_indices(round_index, batch_size, client.shard_x.shape[0])
        x, y = client.shard_x[idx], client.shard_y[idx]

        activations = model.client_forward(client.params, x)
        try:
            payload_up = compressor.compress(
                activations,
                policy.b_max,
                seed=linalg.derive_seed(seed, round_index, cid, _UPLINK),
                stream=client.uplink,
            )
        except BudgetError as exc:
            raise BudgetError(f"round {round_index} client {cid} uplink: {exc}") from exc
        up_bytes.append(len(payload_up))
        received_act = compressor.decompress(payload_up)
        mses.append(float(np.mean((received_act - activations) ** 2)))
        rank_up = _lowrank_rank(payload_up)
        if rank_up is not None:
            ranks.append(rank_up)

        loss, server_grads, d_act = model.server_loss_and_grads(server.params, received_act, y)
        losses.append(loss)

        try:
            if shared_rank and rank_up is not None and isinstance(compressor, NscCompressor):
                payload_down = compressor.compress_at_rank(
                    d_act,
                    policy.b_max,
                    rank_up,
                    seed=linalg.derive_seed(seed, round_index, cid, _DOWNLINK),
                    stream=server.downlink_for(cid),
                )
            else:
                payload_down = compressor.compress(
                    d_act,
                    policy.b_max,
                    seed=linalg.derive_seed(seed, round_index, cid, _DOWNLINK),
                    stream=server.downlink_for(cid),
                )
        except BudgetError as exc:
            raise BudgetError(f"round {round_index} client {cid} downlink: {exc}") from exc
        down_bytes.append(len(payload_down))
        received_grad = compressor.decompress(payload_down)
        mses.append(float(np.mean((received_grad - d_act) ** 2)))
        rank_down = _lowrank_rank(payload_down)
        if rank_down is not None:
            ranks.append(rank_down)

        client_grads = model.client_backward(client.params, x, activations, received_grad)
        model.sgd_step(client.params, client_grads, learning_rate)
        model.sgd_step(server.params, server_grads, learning_rate)

        chain = link.transfer_time(len(payload_up)) + link.transfer_time(len(payload_down))
        slowest = max(slowest, chain)

    return RoundMetrics(
        round_index=round_index,
        loss=float(np.mean(losses)),
        eval_acc=float("nan"),  # filled by the caller on eval rounds
        uplink_bytes=up_bytes,
        downlink_bytes=down_bytes,
        sim_time_s=slowest,
        ranks=ranks,
        mse_values=mses,
    )


def _mean_eval_accuracy(clients: list[ClientState], server: ServerState, task: SyntheticTask) -> float:
    accs = [
        model.accuracy(c.params, server.params, task.eval_x, task.eval_y) for c in clients
    ]
    return float(np.mean(accs))


def run_experiment(cfg: ExperimentConfig) -> list[RoundMetrics]:
    """Run ``cfg.rounds`` rounds; returns per-round metrics (and writes the
    CSV when ``cfg.out`` is set). Byte-identical output for identical configs."""
    cfg.validate()
    clients, server, task = init_simulation(cfg)
    link = LinkModel(bandwidth_bps=cfg.bandwidth_bps, latency_s=cfg.latency_s)
    compressor = build_compressor(cfg)
    policy = RankPolicy(eta=cfg.eta, b_max=cfg.b_max, r_cap=cfg.r_cap)

    history: list[RoundMetrics] = []
    last_acc = float("nan")
    for round_index in range(cfg.rounds):
        metrics = run_round(
            clients,
            server,
            link,
            compressor,
            policy,
            cfg.batch_size,
            learning_rate=cfg.learning_rate,
            round_index=round_index,
            seed=cfg.seed,
            shared_rank=cfg.shared_rank,
        )
        if round_index % cfg.eval_every == 0 or round_index == cfg.rounds - 1:
            last_acc = _mean_eval_accuracy(clients, server, task)
        metrics.eval_acc = last_acc
        history.append(metrics)

    if cfg.out:
        write_metrics_csv(cfg.out, history)
    return history


def train_unsplit_reference(cfg: ExperimentConfig) -> list[float]:
    """Monolithic trainer: identical initialization, batches and update order
    as the simulator, but activations and gradients cross no link. Returns the
    per-round mean loss; the lossless simulator must track it step for step."""
    cfg.validate()
    clients, server, _ = init_simulation(cfg)
    losses = []
    for round_index in range(cfg.rounds):
        round_losses = []
        for client in clients:
            idx = _batch_indices(round_index, cfg.batch_size, client.shard_x.shape[0])
            x, y = client.shard_x[idx], client.shard_y[idx]
            activations = model.client_forward(client.params, x)
            loss, server_grads, d_act = model.server_loss_and_grads(server.params, activations, y)
            round_losses.append(loss)
            client_grads = model.client_backward(client.params, x, activations, d_act)
            model.sgd_step(client.params, client_grads, cfg.learning_rate)
            model.sgd_step(server.params, server_grads, cfg.learning_rate)
        losses.append(float(np.mean(round_losses)))
    return losses


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_metrics_csv(path: str | Path, history: list[RoundMetrics]) -> None:
    """Write the fixed-column CSV atomically (temp file + rename), so a killed
    run never leaves a truncated file with a valid header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(CSV_COLUMNS)
            for m in history:
                writer.writerow(
                    [
                        m.round_index,
                        _format_cell(m.loss),
                        _format_cell(m.eval_acc),
                        m.total_uplink,
                        m.total_downlink,
                        _format_cell(m.sim_time_s),
                        _format_cell(m.mean_rank),
                        _format_cell(m.mean_mse),
                    ]
                )
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
