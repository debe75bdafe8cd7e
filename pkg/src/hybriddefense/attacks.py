"""L-infinity APGD (auto-PGD) with cross-entropy and DLR losses."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import TooFewClasses, ValidationError
from .nn.model import backward, forward, log_softmax, softmax
from .rng import SplitMix64, derive_seed

log = logging.getLogger(__name__)

CHUNK = 256


@dataclass
class AttackConfig:
    epsilon: float = 0.1
    n_iters: int = 100
    n_restarts: int = 1
    rho: float = 0.75
    alpha_momentum: float = 0.75
    losses: tuple = ("ce", "dlr")

    def validate(self):
        if not 0 <= self.epsilon <= 1:
            raise ValidationError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if self.n_iters < 2:
            raise ValidationError("n_iters must be >= 2")
        if self.n_restarts < 1:
            raise ValidationError("n_restarts must be >= 1")
        if not 0 < self.rho < 1:
            raise ValidationError("rho must be in (0, 1)")
        if not 0 < self.alpha_momentum <= 1:
            raise ValidationError("alpha_momentum must be in (0, 1]")
        if not self.losses or any(l not in ("ce", "dlr") for l in self.losses):
            raise ValidationError(f"losses must be a non-empty subset of ('ce', 'dlr')")


@dataclass
class AdversarialBatch:
    x_adv: np.ndarray
    success_mask: np.ndarray
    source_loss: list = field(default_factory=list)


def _logits_and_backprop(model, x, dlogits_fn):
    """Per-sample losses and input gradients, evaluated in bounded chunks."""
    losses, grads, logits_all = [], [], []
    for s in range(0, len(x), CHUNK):
        xc = x[s:s + CHUNK]
        logits, _, cache = forward(model, xc)
        loss, dlogits = dlogits_fn(logits, s)
        _, g = backward(model, cache, dlogits, need_param_grads=False)
        losses.append(loss)
        grads.append(g.reshape(xc.shape))
        logits_all.append(logits)
    return np.concatenate(losses), np.concatenate(grads), np.concatenate(logits_all)


def ce_values(logits, y):
    return -log_softmax(logits)[np.arange(len(y)), y]


def ce_loss_and_grad(model, x, y):
    """Per-sample cross-entropy and its gradient with respect to ``x``."""
    y = np.asarray(y)

    def fn(logits, s):
        yc = y[s:s + len(logits)]
        d = softmax(logits)
        d[np.arange(len(yc)), yc] -= 1.0
        return ce_values(logits, yc), d

    loss, grad, _ = _logits_and_backprop(model, np.asarray(x, dtype=np.float64), fn)
    return loss, grad


def dlr_values_and_dlogits(logits, y):
    """DLR loss -(z_y - max_{i!=y} z_i) / (z_pi1 - z_pi3 + 1e-12) and d/dz."""
    z = np.asarray(logits, dtype=np.float64)
    n, k = z.shape
    if k < 3:
        raise TooFewClasses(f"DLR needs at least 3 classes, got {k}")
    rows = np.arange(n)
    order = np.argsort(-z, axis=1, kind="stable")
    top1, top3 = order[:, 0], order[:, 2]
    other = np.where(top1 == y, order[:, 1], top1)
    num = z[rows, y] - z[rows, other]
    den = z[rows, top1] - z[rows, top3] + 1e-12
    loss = -num / den
    d = np.zeros_like(z)
    np.add.at(d, (rows, y), -1.0 / den)
    np.add.at(d, (rows, other), 1.0 / den)
    np.add.at(d, (rows, top1), num / den**2)
    np.add.at(d, (rows, top3), -num / den**2)
    return loss, d


def dlr_loss_and_grad(model, x, y):
    """Per-sample DLR loss and its gradient with respect to ``x``."""
    y = np.asarray(y)

    def fn(logits, s):
        return dlr_values_and_dlogits(logits, y[s:s + len(logits)])

    loss, grad, _ = _logits_and_backprop(model, np.asarray(x, dtype=np.float64), fn)
    return loss, grad


def project_linf(x_adv, x_clean, epsilon):
    """Clamp into the epsilon box around ``x_clean``, then into [0, 1]."""
    return np.clip(np.clip(x_adv, x_clean - epsilon, x_clean + epsilon), 0.0, 1.0)


def checkpoints(n_iters):
    """Iteration indices w_0 = 0 < w_1 < ... at which the step size is reviewed."""
    p = [0.0, 0.22]
    while True:
        nxt = p[-1] + max(p[-1] - p[-2] - 0.03, 0.06)
        if nxt > 1:
            break
        p.append(nxt)
    w = []
    for pj in p:
        wj = math.ceil(round(pj * n_iters, 9))
        if not w or wj > w[-1]:
            w.append(wj)
    return w


def _loss_fn(model, kind):
    if callable(kind):
        return kind
    if kind == "ce":
        return lambda x, y: ce_loss_and_grad(model, x, y)
    if kind == "dlr":
        return lambda x, y: dlr_loss_and_grad(model, x, y)
    raise ValidationError(f"unknown loss {kind!r}")


def _apgd_run(loss_grad, x, y, x_start, config):
    eps = config.epsilon
    n = len(x)
    bshape = (n,) + (1,) * (x.ndim - 1)
    eta = np.full(bshape, 2.0 * eps)
    alpha = config.alpha_momentum
    w = checkpoints(config.n_iters)
    w_set = set(w[1:])

    x_cur = x_start
    loss_cur, grad = loss_grad(x_cur, y)
    x_best, loss_best, grad_best = x_cur.copy(), loss_cur.copy(), grad.copy()
    x_prev = x_cur
    n_improved = np.zeros(n, dtype=np.int64)
    last_w = 0
    eta_last = eta.copy()
    best_last = loss_best.copy()
    for k in range(config.n_iters):
        a = 1.0 if k == 0 else alpha
        z = project_linf(x_cur + eta * np.sign(grad), x, eps)
        x_new = project_linf(x_cur + a * (z - x_cur) + (1 - a) * (x_cur - x_prev), x, eps)
        loss_new, grad = loss_grad(x_new, y)
        n_improved += loss_new > loss_cur
        better = loss_new > loss_best
        x_best[better] = x_new[better]
        loss_best[better] = loss_new[better]
        grad_best[better] = grad[better]
        x_prev, x_cur, loss_cur = x_cur, x_new, loss_new

        if k + 1 in w_set:
            few_gains = n_improved < config.rho * (k + 1 - last_w)
            stalled = (eta.reshape(n) == eta_last.reshape(n)) & (loss_best == best_last)
            cut = few_gains | stalled
            eta_last = eta.copy()
            best_last = loss_best.copy()
            if cut.any():
                eta[cut] /= 2.0
                x_cur = x_cur.copy()
                x_cur[cut] = x_best[cut]
                grad[cut] = grad_best[cut]
                loss_cur = loss_cur.copy()
                loss_cur[cut] = loss_best[cut]
            n_improved[:] = 0
            last_w = k + 1
    return x_best, loss_best


def apgd(model, x, y, loss_kind="ce", config: AttackConfig = None, seed=0):
    """Auto-PGD in the L-infinity ball; returns (best point, best loss) per sample.

    ``loss_kind`` is "ce", "dlr", or a callable ``(x, y) -> (loss, grad)``
    returning per-sample losses to maximize. The first restart starts at the
    clean input, later ones at uniform random points in the ball.
    """
    config = config or AttackConfig()
    config.validate()
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    loss_grad = _loss_fn(model, loss_kind)
    if config.epsilon == 0:
        loss, _ = loss_grad(x, y)
        return x.copy(), loss
    best_x, best_loss = None, None
    for r in range(config.n_restarts):
        if r == 0:
            start = x.copy()
        else:
            u = SplitMix64(derive_seed(seed, "restart", r)).uniform(x.shape, -1.0, 1.0)
            start = project_linf(x + config.epsilon * u, x, config.epsilon)
        bx, bl = _apgd_run(loss_grad, x, y, start, config)
        if best_x is None:
            best_x, best_loss = bx, bl
        else:
            better = bl > best_loss
            best_x[better] = bx[better]
            best_loss[better] = bl[better]
    return best_x, best_loss


def predict(model, x):
    out = []
    for s in range(0, len(x), CHUNK):
        out.append(forward(model, x[s:s + CHUNK])[0].argmax(axis=1))
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


def worst_case_attack(model, x, y, config: AttackConfig = None, seed=0) -> AdversarialBatch:
    """Run APGD per configured loss and keep, per sample, the first variant
    that changes the prediction, else the variant with the highest final loss.

    Later loss variants only run on samples no earlier variant has flipped,
    since a flipped sample's choice is already final.
    """
    config = config or AttackConfig()
    config.validate()
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    n = len(x)
    x_adv = x.copy()
    kept_loss = np.full(n, -np.inf)
    source = [""] * n
    flipped = np.zeros(n, dtype=bool)
    for kind in config.losses:
        todo = np.flatnonzero(~flipped)
        if len(todo) == 0:
            break
        bx, bl = apgd(model, x[todo], y[todo], kind, config, derive_seed(seed, kind))
        hit = predict(model, bx) != y[todo]
        for j, i in enumerate(todo):
            if hit[j] or bl[j] > kept_loss[i]:
                x_adv[i], kept_loss[i], source[i] = bx[j], bl[j], kind
            flipped[i] = hit[j]
        log.info("apgd-%s: %d/%d samples flipped", kind, int(flipped.sum()), n)
    success = predict(model, x_adv) != y
    return AdversarialBatch(x_adv, success, source)
