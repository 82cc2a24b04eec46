"""Small fully-connected networks with hand-written backprop, plus Adam.

Everything is float64 numpy.  Forward passes cache layer activations; the
backward pass returns parameter gradients in the same nested layout as the
parameters, which is what :class:`Adam` consumes.  :func:`gradcheck`
validates the analytic gradients against central finite differences.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np


class Mlp:
    """Multilayer perceptron with rectifier (or identity) activations.

    Parameters are He-initialized from the supplied generator; the forward
    pass is deterministic given inputs.
    """

    def __init__(
        self,
        layer_sizes: Sequence[int],
        activation: str = "relu",
        rng: Optional[np.random.Generator] = None,
    ):
        if len(layer_sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if activation not in ("relu", "identity"):
            raise ValueError(f"unsupported activation {activation!r}")
        self.layer_sizes = tuple(int(s) for s in layer_sizes)
        self.activation = activation
        rng = rng or np.random.default_rng()
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            scale = np.sqrt(2.0 / fan_in)
            self.weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def parameters(self) -> list[np.ndarray]:
        """Flat list of parameter arrays (weights then bias per layer)."""
        out: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def set_parameters(self, params: Sequence[np.ndarray]) -> None:
        expected = [p.shape for p in self.parameters()]
        got = [np.asarray(p).shape for p in params]
        if expected != got:
            raise ValueError(f"parameter shapes {got} do not match {expected}")
        arrays = [np.array(p, dtype=np.float64) for p in params]
        self.weights = arrays[0::2]
        self.biases = arrays[1::2]

    def copy(self) -> "Mlp":
        clone = Mlp.__new__(Mlp)
        clone.layer_sizes = self.layer_sizes
        clone.activation = self.activation
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone

    def forward(self, x: np.ndarray) -> np.ndarray:
        out, _ = self.forward_cached(x)
        return out

    def forward_cached(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Forward pass returning the output and per-layer inputs for backprop."""
        h = np.atleast_2d(np.asarray(x, dtype=np.float64))
        cache = [h]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            if self.activation == "relu" and i < self.n_layers - 1:
                h = np.maximum(z, 0.0)
            else:
                h = z
            cache.append(h)
        return h, cache

    def backward(
        self, cache: list[np.ndarray], grad_out: np.ndarray
    ) -> list[np.ndarray]:
        """Backpropagate ``dL/d_output`` through the cached forward pass.

        Returns gradients in :meth:`parameters` order.
        """
        grad_w: list[np.ndarray] = [np.empty(0)] * self.n_layers
        grad_b: list[np.ndarray] = [np.empty(0)] * self.n_layers
        delta = np.atleast_2d(np.asarray(grad_out, dtype=np.float64))
        for i in range(self.n_layers - 1, -1, -1):
            h_in = cache[i]
            if self.activation == "relu" and i < self.n_layers - 1:
                delta = delta * (cache[i + 1] > 0.0)
            grad_w[i] = h_in.T @ delta
            grad_b[i] = delta.sum(axis=0)
            if i > 0:
                delta = delta @ self.weights[i].T
        out: list[np.ndarray] = []
        for gw, gb in zip(grad_w, grad_b):
            out += [gw, gb]
        return out


class Adam:
    """Adaptive moment estimation over a list of parameter arrays."""

    def __init__(
        self,
        params: Sequence[np.ndarray],
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        """Update ``params`` in place from ``grads``."""
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1**self.t
        bias2 = 1.0 - b2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)


def clip_grad_norm(grads: Sequence[np.ndarray], max_norm: float) -> float:
    """Scale gradients in place so their global L2 norm is at most ``max_norm``.

    Returns the pre-clip norm.
    """
    total = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for g in grads:
            g *= scale
    return total


LossFn = Callable[[np.ndarray], tuple[float, np.ndarray]]


def mse_loss(target: np.ndarray) -> LossFn:
    """Mean squared error against a fixed target, with its output gradient."""
    target = np.atleast_2d(np.asarray(target, dtype=np.float64))

    def fn(y: np.ndarray) -> tuple[float, np.ndarray]:
        diff = y - target
        return float(np.mean(diff**2)), 2.0 * diff / diff.size

    return fn


def gradcheck(mlp: Mlp, loss_fn: LossFn, x: np.ndarray, h: float = 1e-5) -> float:
    """Compare analytic parameter gradients against central finite differences.

    Returns the maximum relative error over every parameter entry.
    """
    out, cache = mlp.forward_cached(x)
    _, grad_out = loss_fn(out)
    analytic = mlp.backward(cache, grad_out)
    params = mlp.parameters()

    worst = 0.0
    for p, g in zip(params, analytic):
        flat = p.reshape(-1)
        g_flat = g.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            loss_hi, _ = loss_fn(mlp.forward(x))
            flat[k] = orig - h
            loss_lo, _ = loss_fn(mlp.forward(x))
            flat[k] = orig
            numeric = (loss_hi - loss_lo) / (2.0 * h)
            denom = max(abs(g_flat[k]) + abs(numeric), 1e-8)
            worst = max(worst, abs(g_flat[k] - numeric) / denom)
    return worst


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))
