"""Fully-connected embedding network with hand-written forward and backward passes.

ReLU on hidden layers, identity on the output layer, all arithmetic in float64.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, ShapeError


@dataclass
class ForwardTrace:
    """Intermediates kept from a forward pass, enough for an exact backward pass."""

    inputs: np.ndarray
    pre_activations: list[np.ndarray]
    activations: list[np.ndarray]


@dataclass
class Gradients:
    """Parameter gradients, shape-congruent with the owning network."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def global_norm(self) -> float:
        sq = sum(float(np.sum(w * w)) for w in self.weights)
        sq += sum(float(np.sum(b * b)) for b in self.biases)
        return float(np.sqrt(sq))

    def scale(self, factor: float):
        for w in self.weights:
            w *= factor
        for b in self.biases:
            b *= factor

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(w)) for w in self.weights) and all(
            np.all(np.isfinite(b)) for b in self.biases)


class EmbeddingNet:
    """Trainable map from feature vectors to an M-dimensional metric space.

    Weight matrices are stored (out, in); layer l computes a @ W.T + b.
    """

    def __init__(self, layer_dims, weights, biases):
        self.layer_dims = [int(d) for d in layer_dims]
        self.weights = weights
        self.biases = biases

    @classmethod
    def init(cls, layer_dims, seed: int) -> "EmbeddingNet":
        """He-initialized weights (std sqrt(2/fan_in)), zero biases, seeded."""
        if len(layer_dims) < 2 or any(d < 1 for d in layer_dims):
            raise ConfigurationError("layer_dims needs >= 2 entries, all positive")
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
            std = np.sqrt(2.0 / fan_in)
            weights.append(rng.normal(0.0, std, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(layer_dims, weights, biases)

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def forward(self, batch: np.ndarray):
        """Embed a (B, F) batch; returns (embeddings (B, M), trace)."""
        x = np.asarray(batch, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ShapeError(f"batch must be (B, {self.input_dim}), got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ShapeError("batch contains non-finite values")
        pre, act = [], []
        a = x
        for layer, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w.T + b
            pre.append(z)
            a = z if layer == self.n_layers - 1 else np.maximum(z, 0.0)
            act.append(a)
        return a, ForwardTrace(x, pre, act)

    def backward(self, trace: ForwardTrace, grad_embeddings: np.ndarray) -> Gradients:
        """Gradients of <grad_embeddings, forward(x)> w.r.t. all parameters.

        The ReLU subgradient at exactly 0 is taken as 0.
        """
        g = np.asarray(grad_embeddings, dtype=np.float64)
        if g.shape != trace.activations[-1].shape:
            raise ShapeError(
                f"grad_embeddings shape {g.shape} != embeddings shape {trace.activations[-1].shape}")
        grad_w = [None] * self.n_layers
        grad_b = [None] * self.n_layers
        delta = g
        for layer in range(self.n_layers - 1, -1, -1):
            below = trace.inputs if layer == 0 else trace.activations[layer - 1]
            grad_w[layer] = delta.T @ below
            grad_b[layer] = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ self.weights[layer]) * (trace.pre_activations[layer - 1] > 0.0)
        return Gradients(grad_w, grad_b)

    def copy(self) -> "EmbeddingNet":
        return EmbeddingNet(list(self.layer_dims),
                            [w.copy() for w in self.weights],
                            [b.copy() for b in self.biases])

    # --- flat parameter vector, used by checkpoints and gradient checks ---

    def params_flat(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)

    def set_params_flat(self, flat: np.ndarray):
        flat = np.asarray(flat, dtype=np.float64)
        pos = 0
        for i, (fan_in, fan_out) in enumerate(zip(self.layer_dims[:-1], self.layer_dims[1:])):
            self.weights[i] = flat[pos:pos + fan_out * fan_in].reshape(fan_out, fan_in).copy()
            pos += fan_out * fan_in
            self.biases[i] = flat[pos:pos + fan_out].copy()
            pos += fan_out
        if pos != len(flat):
            raise ShapeError(f"flat vector has {len(flat)} entries, expected {pos}")


def save_checkpoint(net: EmbeddingNet, path, episode: int = 0, extra: dict | None = None):
    """JSON checkpoint: layer dims, flattened parameters, episode counter.

    Floats serialize via repr, so a reload restores bit-identical outputs.
    """
    payload = {
        "layer_dims": net.layer_dims,
        "params": net.params_flat().tolist(),
        "episode": episode,
    }
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def load_checkpoint(path) -> tuple[EmbeddingNet, int, dict]:
    """Restore (net, episode, full payload) from :func:`save_checkpoint` output."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        dims = payload["layer_dims"]
        net = EmbeddingNet(dims, [None] * (len(dims) - 1), [None] * (len(dims) - 1))
        net.set_params_flat(np.array(payload["params"], dtype=np.float64))
        episode = int(payload.get("episode", 0))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"{path}: not a valid checkpoint: {exc}") from None
    return net, episode, payload
