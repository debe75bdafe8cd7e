"""Layered networks: initialization, forward pass, exact backward pass."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeMismatch, StaleCache
from ..rng import SplitMix64, derive_seed
from . import layers as L
from .layers import LayerSpec


@dataclass
class ModelParams:
    layers: list
    tensors: dict
    input_shape: tuple
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def copy(self) -> "ModelParams":
        return copy.deepcopy(self)

    @property
    def output_dim(self):
        return infer_shapes(self.layers, self.input_shape)[-1][0]

    @property
    def feature_index(self):
        for i, spec in enumerate(self.layers):
            if spec.feature_layer:
                return i
        return None

    def param_names(self):
        return list(self.tensors)

    def equals(self, other) -> bool:
        return (
            [l.to_dict() for l in self.layers] == [l.to_dict() for l in other.layers]
            and tuple(self.input_shape) == tuple(other.input_shape)
            and self.seed == other.seed
            and list(self.tensors) == list(other.tensors)
            and all(np.array_equal(self.tensors[k], other.tensors[k]) for k in self.tensors)
        )


def _name_layers(layers):
    counts = {}
    named = []
    for spec in layers:
        spec = copy.copy(spec)
        if not spec.name:
            prefix = {"conv2d": "conv", "dense": "dense"}.get(spec.kind, spec.kind)
            counts[prefix] = counts.get(prefix, 0) + 1
            spec.name = f"{prefix}{counts[prefix]}"
        named.append(spec)
    names = [s.name for s in named]
    if len(set(names)) != len(names):
        raise ShapeMismatch(f"duplicate layer names in {names}")
    return named


def infer_shapes(layers, input_shape):
    """Per-sample output shape after each layer; raises on the first bad pair."""
    shapes = []
    shape = tuple(input_shape)
    prev = "input"
    for spec in layers:
        try:
            shape = L.output_shape(spec, shape)
        except ShapeMismatch as exc:
            raise ShapeMismatch(f"{prev} -> {spec.name or spec.kind}: {exc}") from None
        shapes.append(shape)
        prev = spec.name or spec.kind
    if sum(s.feature_layer for s in layers) > 1:
        raise ShapeMismatch("at most one layer may be tagged feature_layer")
    if any(s.feature_layer and s.kind != "dense" for s in layers):
        raise ShapeMismatch("only a dense layer may be tagged feature_layer")
    return shapes


def init_model(layers, input_shape, seed=0) -> ModelParams:
    """Glorot-uniform weights, zero biases, deterministic in ``seed``."""
    layers = _name_layers(layers)
    infer_shapes(layers, input_shape)
    tensors = {}
    for spec in layers:
        if not spec.has_params:
            continue
        fan_in, fan_out = spec.fans()
        a = np.sqrt(6.0 / (fan_in + fan_out))
        shapes = spec.param_shapes()
        rng = SplitMix64(derive_seed(seed, "init", spec.name))
        tensors[f"{spec.name}.w"] = rng.uniform(shapes["w"], -a, a)
        tensors[f"{spec.name}.b"] = np.zeros(shapes["b"])
    return ModelParams(layers, tensors, tuple(input_shape), seed)


def cnn_layers(num_classes=10, feature_dim=128):
    """conv(1->16)-relu-pool, conv(16->32)-relu-pool, dense(1568->F)*-relu, dense(F->K)."""
    return [
        L.conv(1, 16), L.relu(), L.maxpool2(),
        L.conv(16, 32), L.relu(), L.maxpool2(),
        L.flatten(),
        L.dense(32 * 7 * 7, feature_dim, feature_layer=True), L.relu(),
        L.dense(feature_dim, num_classes),
    ]


def mlp_layers(dims):
    """Dense stack with ReLU between consecutive dense layers."""
    out = []
    for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
        if i:
            out.append(L.relu())
        out.append(L.dense(a, b))
    return out


@dataclass
class ForwardCache:
    layer_caches: list
    input_shape: tuple
    output_shape: tuple
    param_shapes: dict


def _as_batch(model, x):
    x = np.asarray(x, dtype=np.float64)
    expect = tuple(model.input_shape)
    if x.shape[1:] == expect:
        return x
    # allow (n, H, W) for single-channel image models
    if len(expect) == 3 and expect[0] == 1 and x.shape[1:] == expect[1:]:
        return x[:, None]
    raise ShapeMismatch(f"batch shape {x.shape} does not match model input {expect}")


def forward(model: ModelParams, batch):
    """Run the network; returns (outputs, features, cache).

    ``features`` is the activation after the ReLU following the tagged dense
    layer (or the dense output itself when no ReLU follows), else None.
    """
    x = _as_batch(model, batch)
    in_shape = x.shape
    if x.ndim == 4:
        x = x.transpose(0, 2, 3, 1)  # NCHW -> NHWC
    caches = []
    features = None
    fidx = model.feature_index
    t = model.tensors
    for i, spec in enumerate(model.layers):
        if spec.kind == "conv2d":
            x, c = L.conv_forward(x, t[f"{spec.name}.w"], t[f"{spec.name}.b"])
        elif spec.kind == "dense":
            x, c = L.dense_forward(x, t[f"{spec.name}.w"], t[f"{spec.name}.b"])
        elif spec.kind == "relu":
            x, c = L.relu_forward(x)
        elif spec.kind == "maxpool2":
            x, c = L.maxpool_forward(x)
        else:
            c = x.shape
            if x.ndim == 4:
                x = x.transpose(0, 3, 1, 2)  # flatten in (C, H, W) order
            x = x.reshape(x.shape[0], -1)
        caches.append(c)
        if fidx is not None and (i == fidx or (i == fidx + 1 and spec.kind == "relu")):
            features = x
    cache = ForwardCache(caches, in_shape, x.shape,
                         {k: v.shape for k, v in model.tensors.items()})
    return x, features, cache


def backward(model: ModelParams, cache: ForwardCache, dout, need_param_grads=True):
    """Exact gradients of a scalar loss given d(loss)/d(outputs).

    Returns (param_grads, input_grad); param_grads is None when not requested.
    """
    dout = np.asarray(dout, dtype=np.float64)
    if dout.shape != cache.output_shape or len(cache.layer_caches) != len(model.layers) or \
            cache.param_shapes != {k: v.shape for k, v in model.tensors.items()}:
        raise StaleCache(f"cache (output {cache.output_shape}) does not match this model/gradient "
                         f"{dout.shape}")
    grads = {} if need_param_grads else None
    t = model.tensors
    g = dout
    for spec, c in zip(reversed(model.layers), reversed(cache.layer_caches)):
        if spec.kind == "conv2d":
            g, pg = L.conv_backward(g, t[f"{spec.name}.w"], c, need_param_grads)
        elif spec.kind == "dense":
            g, pg = L.dense_backward(g, t[f"{spec.name}.w"], c, need_param_grads)
        elif spec.kind == "relu":
            g, pg = L.relu_backward(g, c), None
        elif spec.kind == "maxpool2":
            g, pg = L.maxpool_backward(g, c), None
        elif len(c) == 4:
            n, h, w, ch = c
            g, pg = g.reshape(n, ch, h, w).transpose(0, 2, 3, 1), None
        else:
            g, pg = g.reshape(c), None
        if pg is not None:
            grads[f"{spec.name}.w"] = pg["w"]
            grads[f"{spec.name}.b"] = pg["b"]
    if need_param_grads:
        grads = {k: grads[k] for k in model.tensors}
    if g.ndim == 4:
        g = g.transpose(0, 3, 1, 2)
    return grads, np.ascontiguousarray(g).reshape(cache.input_shape)


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def log_softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy and its gradient (softmax - onehot) / n."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = len(labels)
    logp = log_softmax(logits)
    loss = -logp[np.arange(n), labels].mean()
    d = np.exp(logp)
    d[np.arange(n), labels] -= 1.0
    return float(loss), d / n


def predict_proba(model, x, batch_size=512):
    out = []
    for s in range(0, len(x), batch_size):
        logits, _, _ = forward(model, x[s:s + batch_size])
        out.append(softmax(logits))
    return np.concatenate(out) if out else np.zeros((0, model.output_dim))
