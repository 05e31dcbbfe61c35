"""Toy classifier split across a client/server boundary, with hand-derived
gradients, plus the synthetic clustered-Gaussian task it trains on.

The client holds the front (one linear layer + tanh); the server holds the
back (linear + tanh + linear + softmax cross-entropy). The activation matrix
crossing the cut is (batch x hidden); the gradient flowing back is the loss
gradient with respect to that activation. All math is plain float64 numpy so
a finite-difference check can pin every parameter block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg

__all__ = [
    "ClientParams",
    "ServerParams",
    "ClientGrads",
    "ServerGrads",
    "SyntheticTask",
    "init_params",
    "client_forward",
    "server_loss_and_grads",
    "client_backward",
    "full_loss",
    "sgd_step",
    "accuracy",
    "make_synthetic_task",
]


@dataclass
class ClientParams:
    w1: np.ndarray  # d_in x hidden
    b1: np.ndarray  # hidden


@dataclass
class ServerParams:
    w2: np.ndarray  # hidden x hidden2
    b2: np.ndarray  # hidden2
    w3: np.ndarray  # hidden2 x classes
    b3: np.ndarray  # classes


@dataclass
class ClientGrads:
    w1: np.ndarray
    b1: np.ndarray


@dataclass
class ServerGrads:
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray


def init_params(d_in: int, hidden: int, hidden2: int, classes: int, seed: int) -> tuple[ClientParams, ServerParams]:
    """He-ish scaled Gaussian weights, zero biases, deterministic per seed."""
    client = ClientParams(
        w1=linalg.gaussian(d_in, hidden, linalg.derive_seed(seed, 11)) / np.sqrt(d_in),
        b1=np.zeros(hidden),
    )
    server = ServerParams(
        w2=linalg.gaussian(hidden, hidden2, linalg.derive_seed(seed, 12)) / np.sqrt(hidden),
        b2=np.zeros(hidden2),
        w3=linalg.gaussian(hidden2, classes, linalg.derive_seed(seed, 13)) / np.sqrt(hidden2),
        b3=np.zeros(classes),
    )
    return client, server


def client_forward(p: ClientParams, x: np.ndarray) -> np.ndarray:
    """Front activations: tanh(x @ w1 + b1), shape (batch, hidden)."""
    return np.tanh(x @ p.w1 + p.b1)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def server_loss_and_grads(
    p: ServerParams, activations: np.ndarray, y: np.ndarray
) -> tuple[float, ServerGrads, np.ndarray]:
    """Finish the forward pass, return (mean CE loss, server grads, dL/dactivations).

    ``activations`` is whatever arrived over the link; the gradient returned
    is with respect to that received matrix and is what travels back.
    """
    batch = activations.shape[0]
    h2 = np.tanh(activations @ p.w2 + p.b2)
    logits = h2 @ p.w3 + p.b3
    probs = _softmax(logits)
    loss = float(-np.mean(np.log(probs[np.arange(batch), y] + 1e-300)))

    dlogits = probs.copy()
    dlogits[np.arange(batch), y] -= 1.0
    dlogits /= batch
    grads = ServerGrads(
        w3=h2.T @ dlogits,
        b3=dlogits.sum(axis=0),
        w2=np.zeros_like(p.w2),
        b2=np.zeros_like(p.b2),
    )
    dh2 = dlogits @ p.w3.T
    dz2 = dh2 * (1.0 - h2 * h2)
    grads.w2 = activations.T @ dz2
    grads.b2 = dz2.sum(axis=0)
    d_activations = dz2 @ p.w2.T
    return loss, grads, d_activations


def client_backward(
    p: ClientParams, x: np.ndarray, local_activations: np.ndarray, d_activations: np.ndarray
) -> ClientGrads:
    """Chain the received activation gradient through the client layers.

    Uses the client's own (uncompressed) activations for the tanh derivative;
    the received gradient stands in for the true one when the link is lossy.
    """
    dz1 = d_activations * (1.0 - local_activations * local_activations)
    return ClientGrads(w1=x.T @ dz1, b1=dz1.sum(axis=0))


def full_loss(client: ClientParams, server: ServerParams, x: np.ndarray, y: np.ndarray) -> float:
    """Monolithic forward pass: the loss the unsplit model computes."""
    a = client_forward(client, x)
    loss, _, _ = server_loss_and_grads(server, a, y)
    return loss


def sgd_step(params, grads, lr: float) -> None:
    """Plain SGD, in place: p <- p - lr * g for every matching field."""
    for name, g in vars(grads).items():
        p = getattr(params, name)
        p -= lr * g


def accuracy(client: ClientParams, server: ServerParams, x: np.ndarray, y: np.ndarray) -> float:
    a = client_forward(client, x)
    h2 = np.tanh(a @ server.w2 + server.b2)
    logits = h2 @ server.w3 + server.b3
    return float(np.mean(logits.argmax(axis=1) == y))


@dataclass
class SyntheticTask:
    """Clustered-Gaussian classification data, sharded IID across clients."""

    shards: list[tuple[np.ndarray, np.ndarray]]
    eval_x: np.ndarray
    eval_y: np.ndarray
    d_in: int
    classes: int


def make_synthetic_task(
    seed: int,
    n_clients: int,
    samples_per_client: int,
    d_in: int,
    classes: int,
    *,
    separation: float = 3.0,
    eval_samples: int = 1024,
) -> SyntheticTask:
    """Gaussian class clusters with unit noise and centers ``separation``
    apart from the origin, split evenly (IID) across clients.

    Labels cycle through the classes, so every shard and every contiguous
    batch is class-balanced. Deterministic per seed.
    """
    if classes < 2:
        raise ValueError(f"need at least 2 classes, got {classes}")
    rng = np.random.default_rng(linalg.derive_seed(seed, 21))
    centers = rng.standard_normal((classes, d_in))
    centers *= separation / np.linalg.norm(centers, axis=1, keepdims=True)

    def draw(count: int, gen: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        y = np.arange(count) % classes
        x = centers[y] + gen.standard_normal((count, d_in))
        return x, y

    shards = []
    for cid in range(n_clients):
        gen = np.random.default_rng(linalg.derive_seed(seed, 22, cid))
        shards.append(draw(samples_per_client, gen))
    eval_x, eval_y = draw(eval_samples, np.random.default_rng(linalg.derive_seed(seed, 23)))
    return SyntheticTask(shards=shards, eval_x=eval_x, eval_y=eval_y, d_in=d_in, classes=classes)
