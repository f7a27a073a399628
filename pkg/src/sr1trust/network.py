"""Fully-connected classifier with logistic layers and a softmax head.

The output layer applies the softmax to the logistic activations
themselves, probs = softmax(theta(W_L a + b_L)), not to the raw
pre-activations; the backprop chain therefore carries an extra
theta' factor through the head.  Loss is mean cross-entropy.
"""

from dataclasses import dataclass

import numpy as np

from .trust_region import Objective

# probabilities are clamped here before the log; the gradient ignores the clamp
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class NetworkSpec:
    """Layer widths input-first, e.g. (784, 20, 10)."""

    layer_sizes: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ValueError("NetworkSpec needs >= 2 layers of positive width")

    @property
    def n_classes(self):
        return self.layer_sizes[-1]


def param_count(spec):
    """Total number of weights and biases."""
    sizes = spec.layer_sizes
    return sum(sizes[i + 1] * (sizes[i] + 1) for i in range(len(sizes) - 1))


def init_params(spec, seed):
    """Uniform(-sqrt(6/(fan_in+fan_out))) weights, zero biases, packed."""
    rng = np.random.Generator(np.random.Philox(seed))
    chunks = []
    sizes = spec.layer_sizes
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        chunks.append(rng.uniform(-bound, bound, size=fan_out * fan_in))
        chunks.append(np.zeros(fan_out))
    return np.concatenate(chunks)


def unpack_params(spec, w):
    """Views of the packed vector as a list of (W, b) per layer."""
    w = np.asarray(w, dtype=float)
    if w.shape != (param_count(spec),):
        raise ValueError(
            f"parameter vector has size {w.size}, spec needs {param_count(spec)}"
        )
    layers = []
    pos = 0
    sizes = spec.layer_sizes
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        mat = w[pos:pos + fan_out * fan_in].reshape(fan_out, fan_in)
        pos += fan_out * fan_in
        bias = w[pos:pos + fan_out]
        pos += fan_out
        layers.append((mat, bias))
    return layers


def pack_params(spec, layers):
    """Inverse of unpack_params."""
    chunks = []
    for mat, bias in layers:
        chunks.append(np.asarray(mat, dtype=float).ravel())
        chunks.append(np.asarray(bias, dtype=float).ravel())
    w = np.concatenate(chunks)
    if w.shape != (param_count(spec),):
        raise ValueError("layer shapes do not match the declared sizes")
    return w


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softmax(t):
    shifted = t - t.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def forward(spec, w, x):
    """Class probabilities for a batch of rows; sums to 1 per row."""
    probs, _ = _forward_cached(spec, w, np.asarray(x, dtype=float))
    return probs


def _forward_cached(spec, w, x):
    layers = unpack_params(spec, w)
    acts = [x]
    a = x
    for mat, bias in layers:
        a = _sigmoid(a @ mat.T + bias)
        acts.append(a)
    # the last activation is the logistic head t; softmax sits on top of it
    return _softmax(acts[-1]), acts


def loss_only(spec, w, x, y_onehot):
    """Mean cross-entropy over the batch."""
    probs = forward(spec, w, x)
    picked = np.maximum(np.sum(probs * y_onehot, axis=1), PROB_FLOOR)
    return float(-np.mean(np.log(picked)))


def loss_and_grad(spec, w, x, y_onehot):
    """Mean cross-entropy and its exact gradient as a packed vector.

    Accumulation order is fixed (one matmul per layer over the whole
    batch), so repeated calls are bit-identical.
    """
    x = np.asarray(x, dtype=float)
    y_onehot = np.asarray(y_onehot, dtype=float)
    probs, acts = _forward_cached(spec, w, x)
    layers = unpack_params(spec, w)
    batch = x.shape[0]
    picked = np.maximum(np.sum(probs * y_onehot, axis=1), PROB_FLOOR)
    f = float(-np.mean(np.log(picked)))
    # softmax-with-cross-entropy gives probs - y at the softmax input,
    # then the logistic head contributes its theta' = t(1-t)
    delta = (probs - y_onehot) / batch
    grads = [None] * len(layers)
    for layer in range(len(layers) - 1, -1, -1):
        a_out = acts[layer + 1]
        delta = delta * a_out * (1.0 - a_out)
        mat, _ = layers[layer]
        grads[layer] = (delta.T @ acts[layer], delta.sum(axis=0))
        if layer:
            delta = delta @ mat
    return f, pack_params(spec, grads)


class NetObjective(Objective):
    """Dataset-bound Objective; full evaluations route through the batch
    interface so a full-batch run is bit-identical to the plain one."""

    def __init__(self, spec, x, y_onehot):
        x = np.asarray(x, dtype=float)
        y_onehot = np.asarray(y_onehot, dtype=float)
        if x.shape[0] != y_onehot.shape[0]:
            raise ValueError("x and labels disagree on the number of rows")
        if x.shape[1] != spec.layer_sizes[0]:
            raise ValueError("x width does not match the input layer")
        if y_onehot.shape[1] != spec.n_classes:
            raise ValueError("label width does not match the output layer")
        self.spec = spec
        self.x = x
        self.y = y_onehot
        self.n_obs = x.shape[0]
        self._all = np.arange(self.n_obs)

    def value(self, w):
        return self.batch_value(w, self._all)

    def grad(self, w):
        return self.batch_grad(w, self._all)

    def batch_value(self, w, idx):
        return loss_only(self.spec, w, self.x[idx], self.y[idx])

    def batch_grad(self, w, idx):
        _, g = loss_and_grad(self.spec, w, self.x[idx], self.y[idx])
        return g
