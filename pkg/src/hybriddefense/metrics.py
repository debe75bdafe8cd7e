"""Classification and probabilistic metrics (macro averaging, multiclass MCC)."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import DegenerateLabels, EmptyMatrix, LabelOutOfRange

LOG_CLIP = 1e-15


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # (K, K); row = true class, column = predicted class

    @property
    def n(self):
        return int(self.counts.sum())


@dataclass
class MetricRow:
    accuracy: float
    precision: float
    recall: float
    f1: float
    mcc: float
    balanced_acc: float
    roc_auc: float
    log_loss: float
    brier: float

    def as_dict(self):
        return asdict(self)


def confusion(y_true, y_pred, num_classes) -> ConfusionMatrix:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    for name, y in (("y_true", y_true), ("y_pred", y_pred)):
        if y.size and (y.min() < 0 or y.max() >= num_classes):
            raise LabelOutOfRange(f"{name} has labels outside [0, {num_classes - 1}]")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (y_true, y_pred), 1)
    return ConfusionMatrix(counts)


def _safe_div(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.divide(a, b, out=np.zeros_like(a), where=b != 0)


def classification_metrics(cm: ConfusionMatrix) -> dict:
    """Accuracy, macro precision/recall/F1, multiclass MCC, balanced accuracy.

    Zero denominators yield 0 for the affected per-class value and for MCC.
    """
    c = cm.counts.astype(np.float64)
    n = c.sum()
    if n < 1:
        raise EmptyMatrix("confusion matrix has no samples")
    tp = np.diag(c)
    col = c.sum(axis=0)  # predicted counts
    row = c.sum(axis=1)  # true counts
    precision = _safe_div(tp, col)
    recall = _safe_div(tp, row)
    f1 = _safe_div(2 * precision * recall, precision + recall)
    trace = tp.sum()
    cov_pred = n * n - (col ** 2).sum()
    cov_true = n * n - (row ** 2).sum()
    denom = np.sqrt(cov_pred * cov_true)
    mcc = (trace * n - (col * row).sum()) / denom if denom > 0 else 0.0
    return {
        "accuracy": trace / n,
        "precision": precision.mean(),
        "recall": recall.mean(),
        "f1": f1.mean(),
        "mcc": float(mcc),
        "balanced_acc": recall.mean(),
    }


def roc_auc_ovr(probs, y_true, return_skipped=False):
    """Macro one-vs-rest ROC-AUC via midranks (Mann-Whitney U).

    Classes without both positive and negative samples are skipped.
    """
    probs = np.asarray(probs, dtype=np.float64)
    y_true = np.asarray(y_true)
    aucs, skipped = [], []
    for k in range(probs.shape[1]):
        pos = y_true == k
        n_pos, n_neg = int(pos.sum()), int((~pos).sum())
        if n_pos == 0 or n_neg == 0:
            skipped.append(k)
            continue
        ranks = rankdata(probs[:, k])
        u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2
        aucs.append(u / (n_pos * n_neg))
    if not aucs:
        raise DegenerateLabels("no class has both positive and negative samples")
    auc = float(np.mean(aucs))
    return (auc, skipped) if return_skipped else auc


def log_loss(probs, y_true) -> float:
    probs = np.asarray(probs, dtype=np.float64)
    p = probs[np.arange(len(y_true)), np.asarray(y_true)]
    return float(-np.log(np.clip(p, LOG_CLIP, 1.0)).mean())


def brier(probs, y_true) -> float:
    probs = np.asarray(probs, dtype=np.float64)
    onehot = np.zeros_like(probs)
    onehot[np.arange(len(y_true)), np.asarray(y_true)] = 1.0
    return float(((probs - onehot) ** 2).sum(axis=1).mean())


def metric_row(probs, y_true) -> MetricRow:
    """All nine metrics; hard predictions are the probability argmax."""
    probs = np.asarray(probs, dtype=np.float64)
    y_true = np.asarray(y_true)
    cm = confusion(y_true, probs.argmax(axis=1), probs.shape[1])
    m = classification_metrics(cm)
    return MetricRow(
        roc_auc=roc_auc_ovr(probs, y_true),
        log_loss=log_loss(probs, y_true),
        brier=brier(probs, y_true),
        **{k: float(v) for k, v in m.items()},
    )
