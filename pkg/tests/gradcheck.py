"""Analytic-vs-central-difference gradient checks shared by the test modules."""

import numpy as np

from hybriddefense.nn import layers as L
from hybriddefense.nn.model import backward, forward, init_model, softmax_cross_entropy
from oracles import max_rel_error, numeric_grad

H = 1e-5


def kink_aware(coarse, fine):
    """Per entry, the coarse estimate unless it disagrees with the fine one.

    Disagreement means [x - H, x + H] straddles a ReLU or max-pool kink, where
    the coarse central difference is not a derivative at all. The choice never
    looks at the analytic gradient.
    """
    coarse, fine = np.asarray(coarse), np.asarray(fine)
    crossed = max_rel_error_each(coarse, fine) > 1e-3
    return np.where(crossed, fine, coarse)


def max_rel_error_each(a, n, floor=1e-6):
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def check_model(layers, input_shape, n, seed, loss="linear", max_params=None):
    """Worst relative error over all parameters and the input.

    ``loss`` is "linear" (fixed random projection of the outputs) or "ce"
    (softmax cross-entropy on random labels). ``max_params`` limits how many
    entries per tensor are probed, chosen at random.
    """
    rs = np.random.default_rng(seed)
    model = init_model(layers, input_shape, seed)
    for k in model.tensors:  # non-zero biases so every path is exercised
        model.tensors[k] = model.tensors[k] + 0.1 * rs.standard_normal(model.tensors[k].shape)
    x = rs.standard_normal((n,) + tuple(input_shape))
    out_dim = forward(model, x)[0].shape
    proj = rs.standard_normal(out_dim)
    labels = rs.integers(0, out_dim[-1], n)

    def value_and_dout(m, xx):
        out, _, cache = forward(m, xx)
        if loss == "ce":
            v, d = softmax_cross_entropy(out, labels)
        else:
            v, d = float((out * proj).sum()), proj
        return v, d, cache

    _, dout, cache = value_and_dout(model, x)
    grads, gx = backward(model, cache, dout)
    worst = {}
    f = lambda xx: value_and_dout(model, xx)[0]  # noqa: E731
    num_x = kink_aware(numeric_grad(f, x, H), numeric_grad(f, x, H / 100))
    worst["input"] = max_rel_error(gx, num_x)
    for name, w in model.tensors.items():
        flat = w.reshape(-1)
        idx = np.arange(flat.size)
        if max_params is not None and flat.size > max_params:
            idx = rs.choice(flat.size, max_params, replace=False)
        num = np.empty((2, len(idx)))
        for j, i in enumerate(idx):
            old = flat[i]
            for row, h in enumerate((H, H / 100)):
                flat[i] = old + h
                fp = value_and_dout(model, x)[0]
                flat[i] = old - h
                fm = value_and_dout(model, x)[0]
                flat[i] = old
                num[row, j] = (fp - fm) / (2 * h)
        worst[name] = max_rel_error(grads[name].reshape(-1)[idx], kink_aware(*num))
    return worst


def layer_cases(seed):
    """One random small network per layer kind; returns {kind: (layers, shape, n)}."""
    rs = np.random.default_rng(seed)
    c = int(rs.integers(1, 4))
    o = int(rs.integers(1, 4))
    h = 2 * int(rs.integers(1, 4))
    w = 2 * int(rs.integers(1, 4))
    d = int(rs.integers(2, 7))
    k = int(rs.integers(2, 6))
    n = int(rs.integers(1, 4))
    return {
        "conv2d": ([L.conv(c, o), L.flatten(), L.dense(o * h * w, k)], (c, h, w), n),
        "maxpool2": ([L.maxpool2(), L.flatten(), L.dense(c * h * w // 4, k)], (c, h, w), n),
        "relu": ([L.dense(d, d + 1), L.relu(), L.dense(d + 1, k)], (d,), n),
        "dense": ([L.dense(d, k)], (d,), n),
        "flatten": ([L.flatten(), L.dense(c * h * w, k)], (c, h, w), n),
    }
