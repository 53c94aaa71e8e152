"""Trainable neural signed-distance field: encoded-coordinate MLP + AdamW.

The network is a small tanh MLP over Fourier-encoded coordinates with a
linear scalar head. Gradients are exact reverse-mode, written out layer by
layer (validated against finite differences in the test suite), so there is
no autodiff dependency.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .geometry import ScalarField
from .rng import substream

CHECKPOINT_FORMAT = "pairsdf-field-v1"


class TrainingDiverged(RuntimeError):
    """A parameter or gradient became non-finite."""


def encode(q, levels: int) -> np.ndarray:
    """Fourier features: [q, sin(2^0 pi q), cos(2^0 pi q), ..., sin(2^(L-1) pi q), cos(...)].

    Output length is 3 + 6*levels along the last axis; levels=0 returns q.
    """
    q = np.asarray(q, dtype=np.float64)
    parts = [q]
    for level in range(levels):
        arg = (2.0**level) * np.pi * q
        parts.append(np.sin(arg))
        parts.append(np.cos(arg))
    return np.concatenate(parts, axis=-1) if levels > 0 else q.copy()


class NeuralSdf(ScalarField):
    """MLP signed-distance field.

    Initialization uses uniform fan-in scaling from a seeded stream; the
    final bias starts at a small positive value so the initial surface is
    empty instead of degenerate.
    """

    def __init__(self, encoding_levels: int = 6, hidden_layers=(128, 128, 128, 128), seed: int = 0):
        if encoding_levels < 0:
            raise ValueError("encoding_levels must be >= 0")
        self.encoding_levels = int(encoding_levels)
        in_dim = 3 + 6 * self.encoding_levels
        self.layer_sizes = [in_dim, *map(int, hidden_layers), 1]
        gen = substream(seed, "field-init")
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(gen.uniform(-bound, bound, (fan_in, fan_out)))
            self.biases.append(gen.uniform(-bound, bound, fan_out))
        self.biases[-1][:] = 0.1

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def parameters(self) -> list[np.ndarray]:
        """Weights and biases interleaved per layer: [W0, b0, W1, b1, ...]."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def assert_finite(self) -> None:
        for p in self.parameters():
            if not np.isfinite(p).all():
                raise TrainingDiverged("non-finite parameter")

    def _forward_from_features(self, x: np.ndarray, keep: bool = False):
        activations = [x] if keep else None
        for i in range(self.n_layers - 1):
            x = np.tanh(x @ self.weights[i] + self.biases[i])
            if keep:
                activations.append(x)
        y = x @ self.weights[-1] + self.biases[-1]
        return (y, activations) if keep else y

    def forward(self, q) -> np.ndarray:
        """Signed distance at q; batched over leading axes."""
        q = np.asarray(q, dtype=np.float64)
        lead = q.shape[:-1]
        feats = encode(q.reshape(-1, 3), self.encoding_levels)
        y = self._forward_from_features(feats)
        return y.reshape(lead)

    # ScalarField contract
    def eval(self, q) -> np.ndarray:
        return self.forward(q)

    def backward(self, q_batch, targets) -> tuple[float, list[np.ndarray]]:
        """Loss and exact gradient of mean squared error over the batch.

        Returns (loss, grads) with grads ordered like parameters():
        [dW0, db0, dW1, db1, ...]. Raises TrainingDiverged on non-finite
        gradients.
        """
        q = np.asarray(q_batch, dtype=np.float64).reshape(-1, 3)
        t = np.asarray(targets, dtype=np.float64).reshape(-1)
        if q.shape[0] == 0:
            raise ValueError("batch must be non-empty")
        feats = encode(q, self.encoding_levels)
        y, acts = self._forward_from_features(feats, keep=True)
        resid = y.reshape(-1) - t
        loss = float(np.mean(resid**2))
        batch = q.shape[0]
        delta = (2.0 / batch) * resid[:, None]
        grads: list[np.ndarray] = [None] * (2 * self.n_layers)
        # linear head
        grads[2 * (self.n_layers - 1)] = acts[-1].T @ delta
        grads[2 * (self.n_layers - 1) + 1] = delta.sum(axis=0)
        upstream = delta @ self.weights[-1].T
        # hidden tanh layers, back to front
        for i in range(self.n_layers - 2, -1, -1):
            dz = upstream * (1.0 - acts[i + 1] ** 2)
            grads[2 * i] = acts[i].T @ dz
            grads[2 * i + 1] = dz.sum(axis=0)
            if i > 0:
                upstream = dz @ self.weights[i].T
        for g in grads:
            if not np.isfinite(g).all():
                raise TrainingDiverged("non-finite gradient")
        return loss, grads

    def copy(self) -> "NeuralSdf":
        dup = NeuralSdf.__new__(NeuralSdf)
        dup.encoding_levels = self.encoding_levels
        dup.layer_sizes = list(self.layer_sizes)
        dup.weights = [w.copy() for w in self.weights]
        dup.biases = [b.copy() for b in self.biases]
        return dup


@dataclass
class AdamWState:
    """Moment accumulators plus hyperparameters for decoupled weight decay."""

    learning_rate: float = 1e-4
    weight_decay: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list = dataclass_field(default_factory=list)
    v: list = dataclass_field(default_factory=list)

    @classmethod
    def for_field(cls, field_: NeuralSdf, learning_rate: float = 1e-4, weight_decay: float = 1e-4):
        state = cls(learning_rate=learning_rate, weight_decay=weight_decay)
        state.m = [np.zeros_like(p) for p in field_.parameters()]
        state.v = [np.zeros_like(p) for p in field_.parameters()]
        return state


def adamw_step(field_: NeuralSdf, state: AdamWState, grads: list[np.ndarray]) -> None:
    """One AdamW update in place: decoupled decay, bias-corrected moments."""
    params = field_.parameters()
    if len(grads) != len(params):
        raise ValueError("gradient/parameter count mismatch")
    state.step_count += 1
    t = state.step_count
    bias1 = 1.0 - state.beta1**t
    bias2 = 1.0 - state.beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError("gradient shape mismatch")
        p *= 1.0 - state.learning_rate * state.weight_decay
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.learning_rate * (m / bias1) / (np.sqrt(v / bias2) + state.eps)
    field_.assert_finite()


def save_checkpoint(field_: NeuralSdf, path, extra: dict | None = None) -> None:
    """Binary container: one JSON header line, then raw little-endian float64
    parameter blocks in parameters() order. Round trips bit-exactly.
    """
    header = {
        "format": CHECKPOINT_FORMAT,
        "encoding_levels": field_.encoding_levels,
        "layer_sizes": field_.layer_sizes,
        "activation": "tanh",
        "extra": extra or {},
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for p in field_.parameters():
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[NeuralSdf, dict]:
    """Inverse of save_checkpoint; returns (field, header)."""
    with open(path, "rb") as fh:
        raw = fh.readline()
        header = json.loads(raw.decode("utf-8"))
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"unrecognized checkpoint format: {header.get('format')!r}")
        sizes = header["layer_sizes"]
        blob = fh.read()
    field_ = NeuralSdf.__new__(NeuralSdf)
    field_.encoding_levels = int(header["encoding_levels"])
    field_.layer_sizes = [int(s) for s in sizes]
    field_.weights = []
    field_.biases = []
    offset = 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        w_bytes = fan_in * fan_out * 8
        w = np.frombuffer(blob, dtype="<f8", count=fan_in * fan_out, offset=offset)
        field_.weights.append(w.reshape(fan_in, fan_out).copy())
        offset += w_bytes
        b = np.frombuffer(blob, dtype="<f8", count=fan_out, offset=offset)
        field_.biases.append(b.copy())
        offset += fan_out * 8
    if offset != len(blob):
        raise ValueError("checkpoint payload size mismatch")
    return field_, header
