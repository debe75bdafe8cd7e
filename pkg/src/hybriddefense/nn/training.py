"""Mini-batch classifier training with best-validation snapshotting."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import EmptyDataset
from ..rng import SplitMix64, derive_seed
from .model import backward, forward, softmax_cross_entropy
from .optim import OptimState, optimizer_step

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 64
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    momentum: float = 0.9
    seed: int = 0


@dataclass
class TrainResult:
    model: object
    loss_trace: list = field(default_factory=list)
    val_trace: list = field(default_factory=list)
    best_epoch: int = -1
    best_val: float = float("nan")


def accuracy(model, x, y, batch_size=512):
    hits = 0
    for s in range(0, len(y), batch_size):
        logits, _, _ = forward(model, x[s:s + batch_size])
        hits += int((logits.argmax(axis=1) == y[s:s + batch_size]).sum())
    return hits / len(y)


def batches(n, batch_size, seed, epoch):
    perm = SplitMix64(derive_seed(seed, "epoch", epoch)).permutation(n)
    for s in range(0, n, batch_size):
        yield perm[s:s + batch_size]


def train(model, x, y, config: TrainConfig, validation=None) -> TrainResult:
    """Train a copy of ``model`` with softmax cross-entropy.

    Returns the snapshot with the highest validation accuracy (earliest epoch
    wins ties), or the final model when no validation data is given.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(y) == 0:
        raise EmptyDataset("training set is empty")
    model = model.copy()
    state = OptimState(config.optimizer, config.learning_rate, config.momentum)
    result = TrainResult(model)
    best = None
    for epoch in range(config.epochs):
        total = 0.0
        for idx in batches(len(y), config.batch_size, config.seed, epoch):
            logits, _, cache = forward(model, x[idx])
            loss, dlogits = softmax_cross_entropy(logits, y[idx])
            grads, _ = backward(model, cache, dlogits)
            optimizer_step(model, grads, state)
            total += loss * len(idx)
        result.loss_trace.append(total / len(y))
        if validation is not None:
            acc = accuracy(model, *validation)
            result.val_trace.append(acc)
            if best is None or acc > result.best_val:
                best, result.best_val, result.best_epoch = model.copy(), acc, epoch
            log.info("epoch %d loss %.4f val_acc %.4f", epoch, result.loss_trace[-1], acc)
        else:
            log.info("epoch %d loss %.4f", epoch, result.loss_trace[-1])
    result.model = best if best is not None else model
    return result
