"""Minimal dense network with manual backprop, neuron masks, and structured pruning.

Hidden activations carry per-neuron binary masks (Hadamard product before the
next layer), importance is the L2 norm of a neuron's incoming row concatenated
with its outgoing column, sparsity follows a cubic ramp, and compaction
physically deletes masked neurons at the end of training.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CHECKPOINT_VERSION = 1

_ACTIVATIONS = {
    "relu": (lambda z: np.maximum(z, 0.0), lambda z: (z > 0.0).astype(float)),
    "tanh": (np.tanh, lambda z: 1.0 - np.tanh(z) ** 2),
    "identity": (lambda z: z, lambda z: np.ones_like(z)),
}


@dataclass
class DenseLayer:
    """Fully connected layer: out x in weights, optional bias, named activation."""

    weights: np.ndarray
    bias: np.ndarray | None = None
    activation: str = "relu"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.ndim != 2:
            raise ValueError("weights must be a 2-D matrix")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.bias is not None:
            self.bias = np.asarray(self.bias, dtype=float)
            if self.bias.shape != (self.weights.shape[0],):
                raise ValueError("bias shape mismatch")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("non-finite weights")

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]


@dataclass
class PruneSchedule:
    """Cubic sparsity ramp from initial to target over M pruning steps."""

    initial_sparsity: float
    target_sparsity: float
    start_epoch: int
    total_steps: int
    frequency: int = 1

    def __post_init__(self):
        if not 0.0 <= self.initial_sparsity < 1.0:
            raise ValueError("initial_sparsity must lie in [0, 1)")
        if not 0.0 <= self.target_sparsity < 1.0:
            raise ValueError("target_sparsity must lie in [0, 1)")
        if self.initial_sparsity > self.target_sparsity:
            raise ValueError("initial sparsity above target")
        if self.frequency < 1:
            raise ValueError("frequency must be >= 1")

    @property
    def end_epoch(self) -> int:
        return self.start_epoch + self.total_steps * self.frequency

    def is_update_epoch(self, epoch: int) -> bool:
        return (self.start_epoch <= epoch <= self.end_epoch
                and (epoch - self.start_epoch) % self.frequency == 0)


def sparsity_at(schedule: PruneSchedule, epoch: int) -> float:
    """Scheduled sparsity fraction at an epoch, clamped to the ramp endpoints."""
    span = schedule.total_steps * schedule.frequency
    t = min(max(epoch - schedule.start_epoch, 0), span)
    if t == 0:
        return schedule.initial_sparsity
    if t == span:
        return schedule.target_sparsity
    frac = (1.0 - t / span) ** 3
    return schedule.target_sparsity + (schedule.initial_sparsity
                                       - schedule.target_sparsity) * frac


class PrunableMlp:
    """Layered dense net; masks live on hidden layers only."""

    def __init__(self, layers: list[DenseLayer]):
        if not layers:
            raise ValueError("need at least one layer")
        for a, b in zip(layers, layers[1:]):
            if b.in_dim != a.out_dim:
                raise ValueError("adjacent layer dimensions do not match")
        self.layers = layers
        self.masks = [np.ones(l.out_dim) for l in layers[:-1]]

    # -- construction helpers ------------------------------------------------

    @classmethod
    def create(cls, sizes: list[int], activations: list[str] | None = None,
               rng: np.random.Generator | None = None, scale: float | None = None,
               use_bias: bool = False) -> "PrunableMlp":
        """He-style random init for the dims in sizes (input, hidden..., output)."""
        rng = rng or np.random.default_rng()
        if activations is None:
            activations = ["relu"] * (len(sizes) - 2) + ["identity"]
        layers = []
        for k, (n_in, n_out) in enumerate(zip(sizes, sizes[1:])):
            s = scale if scale is not None else np.sqrt(2.0 / n_in)
            w = rng.standard_normal((n_out, n_in)) * s
            b = np.zeros(n_out) if use_bias else None
            layers.append(DenseLayer(w, b, activations[k]))
        return cls(layers)

    @property
    def num_hidden_layers(self) -> int:
        return len(self.layers) - 1

    def hidden_sizes(self) -> list[int]:
        return [l.out_dim for l in self.layers[:-1]]

    def copy(self) -> "PrunableMlp":
        net = PrunableMlp([DenseLayer(l.weights.copy(),
                                      None if l.bias is None else l.bias.copy(),
                                      l.activation) for l in self.layers])
        net.masks = [m.copy() for m in self.masks]
        return net

    # -- forward / backward --------------------------------------------------

    def forward(self, x, masked: bool = True):
        """Batched forward pass; returns (output, cache) for backward.

        x may be a single vector or a (batch, in_dim) matrix.
        """
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        a = x[None, :] if single else x
        if a.shape[1] != self.layers[0].in_dim:
            raise ValueError("input dimension mismatch")
        cache = {"inputs": [a], "pre": []}
        for k, layer in enumerate(self.layers):
            z = a @ layer.weights.T
            if layer.bias is not None:
                z = z + layer.bias
            act, _ = _ACTIVATIONS[layer.activation]
            o = act(z)
            if masked and k < len(self.masks):
                o = o * self.masks[k]
            cache["pre"].append(z)
            cache["inputs"].append(o)
            a = o
        out = a[0] if single else a
        return out, cache

    def masked_forward(self, x):
        out, _ = self.forward(x, masked=True)
        return out

    def unmasked_forward(self, x):
        out, _ = self.forward(x, masked=False)
        return out

    def backward(self, cache, output_gradient):
        """Gradients of a scalar loss w.r.t. every weight matrix (and bias).

        output_gradient is dloss/doutput with the same batch shape the forward
        pass used.  Returns (weight_grads, bias_grads) lists; masked neurons get
        exactly zero incoming and outgoing weight gradients.
        """
        g = np.asarray(output_gradient, dtype=float)
        if g.ndim == 1:
            g = g[None, :]
        weight_grads = [None] * len(self.layers)
        bias_grads = [None] * len(self.layers)
        delta = g
        for k in reversed(range(len(self.layers))):
            layer = self.layers[k]
            if k < len(self.masks):
                delta = delta * self.masks[k]
            _, dact = _ACTIVATIONS[layer.activation]
            delta = delta * dact(cache["pre"][k])
            weight_grads[k] = delta.T @ cache["inputs"][k]
            if layer.bias is not None:
                bias_grads[k] = delta.sum(axis=0)
            delta = delta @ layer.weights
        return weight_grads, bias_grads


# ---------------------------------------------------------------------------
# Importance, masking, compaction
# ---------------------------------------------------------------------------

def neuron_importance(net: PrunableMlp) -> list[np.ndarray]:
    """Per-hidden-neuron score: L2 norm of incoming row ++ outgoing column."""
    scores = []
    for k in range(net.num_hidden_layers):
        incoming = net.layers[k].weights
        outgoing = net.layers[k + 1].weights
        scores.append(np.sqrt(np.sum(incoming ** 2, axis=1)
                              + np.sum(outgoing ** 2, axis=0)))
    return scores


def update_masks(net: PrunableMlp, schedule: PruneSchedule, epoch: int,
                 floor_neurons: int = 4) -> float:
    """Re-mask hidden neurons so the pooled sparsity tracks the schedule.

    The k lowest-importance neurons are masked, k = round(w(t) * N); ties break
    deterministically by (layer, index).  Each hidden layer keeps at least
    floor_neurons active (its top scorers are reactivated if needed).  Returns
    the threshold: the smallest surviving score, or 0 when nothing is masked.
    Masks are soft; previously masked neurons may come back.
    """
    w = sparsity_at(schedule, epoch)
    scores = neuron_importance(net)
    pooled = [(scores[k][n], k, n)
              for k in range(net.num_hidden_layers)
              for n in range(len(scores[k]))]
    pooled.sort()
    total = len(pooled)
    k_mask = int(round(w * total))

    masks = [np.ones(len(s)) for s in scores]
    for score, layer, idx in pooled[:k_mask]:
        masks[layer][idx] = 0.0
    threshold = pooled[k_mask][0] if k_mask < total else float("inf")
    if k_mask == 0:
        threshold = 0.0

    # per-layer floor: reactivate top scorers of collapsed layers
    for k, m in enumerate(masks):
        active = int(m.sum())
        if active < floor_neurons:
            order = np.lexsort((np.arange(len(m)), -scores[k]))
            for idx in order[:floor_neurons]:
                m[idx] = 1.0
    net.masks = masks
    return threshold


def compact(net: PrunableMlp) -> PrunableMlp:
    """Physically delete masked neurons; forward equals masked_forward exactly."""
    keep = [np.flatnonzero(m > 0) for m in net.masks]
    layers = []
    for k, layer in enumerate(net.layers):
        w = layer.weights
        b = layer.bias
        if k > 0:
            w = w[:, keep[k - 1]]
        if k < len(net.masks):
            w = w[keep[k], :]
            b = None if b is None else b[keep[k]]
        layers.append(DenseLayer(w.copy(), None if b is None else b.copy(),
                                 layer.activation))
    return PrunableMlp(layers)


def parameter_count(net: PrunableMlp) -> int:
    return int(sum(l.weights.size + (0 if l.bias is None else l.bias.size)
                   for l in net.layers))


# ---------------------------------------------------------------------------
# Checkpoint format (versioned npz; round-trip is bit-exact)
# ---------------------------------------------------------------------------

def save_net(net: PrunableMlp, path, extra: dict | None = None) -> None:
    payload = {
        "version": np.array(CHECKPOINT_VERSION),
        "num_layers": np.array(len(net.layers)),
        "activations": np.array([l.activation for l in net.layers]),
    }
    for k, layer in enumerate(net.layers):
        payload[f"w{k}"] = layer.weights
        if layer.bias is not None:
            payload[f"b{k}"] = layer.bias
    for k, m in enumerate(net.masks):
        payload[f"m{k}"] = m
    for key, val in (extra or {}).items():
        payload[f"x_{key}"] = np.asarray(val)
    np.savez(path, **payload)


def load_net(path) -> tuple[PrunableMlp, dict]:
    with np.load(path, allow_pickle=False) as data:
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        n = int(data["num_layers"])
        activations = [str(a) for a in data["activations"]]
        layers = [DenseLayer(data[f"w{k}"],
                             data[f"b{k}"] if f"b{k}" in data else None,
                             activations[k]) for k in range(n)]
        net = PrunableMlp(layers)
        net.masks = [data[f"m{k}"] for k in range(n - 1)]
        extra = {key[2:]: data[key] for key in data.files if key.startswith("x_")}
    return net, extra
