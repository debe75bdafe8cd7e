"""Layer specs, shape inference, and per-layer forward/backward kernels.

Dense weights are stored (out_dim, in_dim); conv weights (out_ch, in_ch, 3, 3).
Per-sample shapes in specs and shape inference are (C, H, W) for spatial
stages and (features,) for dense stages.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeMismatch

KINDS = ("conv2d", "maxpool2", "relu", "flatten", "dense")
KERNEL = 3


@dataclass
class LayerSpec:
    kind: str
    name: str = ""
    in_ch: int = 0
    out_ch: int = 0
    in_dim: int = 0
    out_dim: int = 0
    feature_layer: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ShapeMismatch(f"unknown layer kind {self.kind!r}")

    @property
    def has_params(self):
        return self.kind in ("conv2d", "dense")

    def param_shapes(self):
        if self.kind == "conv2d":
            return {"w": (self.out_ch, self.in_ch, KERNEL, KERNEL), "b": (self.out_ch,)}
        if self.kind == "dense":
            return {"w": (self.out_dim, self.in_dim), "b": (self.out_dim,)}
        return {}

    def fans(self):
        if self.kind == "conv2d":
            k2 = KERNEL * KERNEL
            return self.in_ch * k2, self.out_ch * k2
        return self.in_dim, self.out_dim

    def to_dict(self):
        d = {"kind": self.kind, "name": self.name}
        if self.kind == "conv2d":
            d.update(in_ch=self.in_ch, out_ch=self.out_ch)
        elif self.kind == "dense":
            d.update(in_dim=self.in_dim, out_dim=self.out_dim)
        if self.feature_layer:
            d["feature_layer"] = True
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def conv(in_ch, out_ch):
    return LayerSpec("conv2d", in_ch=in_ch, out_ch=out_ch)


def dense(in_dim, out_dim, feature_layer=False):
    return LayerSpec("dense", in_dim=in_dim, out_dim=out_dim, feature_layer=feature_layer)


def relu():
    return LayerSpec("relu")


def maxpool2():
    return LayerSpec("maxpool2")


def flatten():
    return LayerSpec("flatten")


def output_shape(spec: LayerSpec, shape: tuple) -> tuple:
    """Per-sample output shape of ``spec`` given per-sample input ``shape``."""
    if spec.kind == "conv2d":
        if len(shape) != 3 or shape[0] != spec.in_ch:
            raise ShapeMismatch(f"{spec.name} expects (C={spec.in_ch}, H, W), got {shape}")
        return (spec.out_ch, shape[1], shape[2])
    if spec.kind == "maxpool2":
        if len(shape) != 3 or shape[1] % 2 or shape[2] % 2:
            raise ShapeMismatch(f"{spec.name} expects (C, H, W) with even H, W, got {shape}")
        return (shape[0], shape[1] // 2, shape[2] // 2)
    if spec.kind == "flatten":
        return (int(np.prod(shape)),)
    if spec.kind == "dense":
        if len(shape) != 1 or shape[0] != spec.in_dim:
            raise ShapeMismatch(f"{spec.name} expects ({spec.in_dim},), got {shape}")
        return (spec.out_dim,)
    return shape


def specs_to_json(layers):
    return [l.to_dict() for l in layers]


# ---------------------------------------------------------------------------
# kernels; each forward returns (out, cache) and each backward (dx, grads).
# Spatial kernels work on NHWC arrays; the model converts at the boundaries.

def _conv_matrix(w):
    # (O, C, 3, 3) -> (O, 3*3*C), matching the (di, dj, c) column order of cols
    return w.transpose(0, 2, 3, 1).reshape(w.shape[0], -1)


def conv_forward(x, w, b):
    n, h, wd, c = x.shape
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    cols = np.empty((n, h, wd, KERNEL, KERNEL, c))
    for di in range(KERNEL):
        for dj in range(KERNEL):
            cols[:, :, :, di, dj, :] = xp[:, di:di + h, dj:dj + wd, :]
    cols = cols.reshape(n * h * wd, -1)
    out = cols @ _conv_matrix(w).T + b
    return out.reshape(n, h, wd, -1), (cols, x.shape)


def conv_backward(dout, w, cache, need_param_grads=True):
    cols, (n, h, wd, c) = cache
    o = w.shape[0]
    d2 = dout.reshape(-1, o)
    grads = None
    if need_param_grads:
        gw = (d2.T @ cols).reshape(o, KERNEL, KERNEL, c).transpose(0, 3, 1, 2)
        grads = {"w": np.ascontiguousarray(gw), "b": d2.sum(axis=0)}
    dcols = (d2 @ _conv_matrix(w)).reshape(n, h, wd, KERNEL, KERNEL, c)
    dxp = np.zeros((n, h + 2, wd + 2, c))
    for di in range(KERNEL):
        for dj in range(KERNEL):
            dxp[:, di:di + h, dj:dj + wd, :] += dcols[:, :, :, di, dj, :]
    return dxp[:, 1:-1, 1:-1, :], grads


_OFFSETS = ((0, 0), (0, 1), (1, 0), (1, 1))  # row-major scan order inside a window


def maxpool_forward(x):
    win = np.stack([x[:, dy::2, dx::2, :] for dy, dx in _OFFSETS], axis=-1)
    # argmax returns the first maximum in scan order on ties
    idx = win.argmax(axis=-1)
    out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
    return out, (idx, x.shape)


def maxpool_backward(dout, cache):
    idx, shape = cache
    dx = np.zeros(shape)
    for k, (dy, dxo) in enumerate(_OFFSETS):
        dx[:, dy::2, dxo::2, :] = dout * (idx == k)
    return dx


def relu_forward(x):
    mask = x > 0
    return x * mask, mask


def relu_backward(dout, mask):
    return dout * mask


def dense_forward(x, w, b):
    return x @ w.T + b, x


def dense_backward(dout, w, x, need_param_grads=True):
    grads = {"w": dout.T @ x, "b": dout.sum(axis=0)} if need_param_grads else None
    return dout @ w, grads
