"""Hybrid feature space: CNN feature-layer activations next to NNMF coefficients."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import DimMismatch, NoFeatureLayer, RowMismatch, TooFewSamples
from .nn.model import forward

STD_FLOOR = 1e-8


def layout_checksum(cnn_dim: int, nnmf_k: int) -> str:
    """Fingerprint of the column layout; changes if the block order or sizes change."""
    return hashlib.sha256(f"cnn:{cnn_dim}|nnmf:{nnmf_k}".encode()).hexdigest()[:16]


@dataclass
class ScalerStats:
    mean: np.ndarray
    std: np.ndarray
    cnn_dim: int = 0
    nnmf_k: int = 0

    @property
    def dim(self):
        return len(self.mean)

    @property
    def layout(self):
        return layout_checksum(self.cnn_dim, self.nnmf_k)


@dataclass
class HybridFeatures:
    matrix: np.ndarray  # (n, F + k), CNN block first
    labels: np.ndarray
    cnn_dim: int
    nnmf_k: int


def extract_cnn_features(model, images, batch_size=500) -> np.ndarray:
    """Post-ReLU activations of the tagged feature layer, one row per image."""
    if model.feature_index is None:
        raise NoFeatureLayer("model has no layer tagged feature_layer")
    rows = []
    for s in range(0, len(images), batch_size):
        _, feats, _ = forward(model, images[s:s + batch_size])
        rows.append(feats)
    return np.concatenate(rows)


def fit_scaler(train_features, cnn_dim=0, nnmf_k=0) -> ScalerStats:
    """Per-column mean and population std, std floored at 1e-8."""
    x = np.asarray(train_features, dtype=np.float64)
    if x.ndim != 2 or len(x) < 2:
        raise TooFewSamples(f"need at least 2 rows to fit a scaler, got {len(x)}")
    mean = x.mean(axis=0)
    std = np.maximum(np.sqrt(((x - mean) ** 2).mean(axis=0)), STD_FLOOR)
    return ScalerStats(mean, std, cnn_dim, nnmf_k)


def apply_scaler(features, stats: ScalerStats) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != stats.dim:
        raise DimMismatch(f"features have {x.shape[-1]} columns, scaler expects {stats.dim}")
    return (x - stats.mean) / stats.std


def concat_features(cnn_feats, nnmf_coeffs) -> np.ndarray:
    cnn_feats = np.asarray(cnn_feats, dtype=np.float64)
    nnmf_coeffs = np.asarray(nnmf_coeffs, dtype=np.float64)
    if len(cnn_feats) != len(nnmf_coeffs):
        raise RowMismatch(f"{len(cnn_feats)} CNN rows vs {len(nnmf_coeffs)} NNMF rows")
    return np.hstack([cnn_feats, nnmf_coeffs])


def build_hybrid(cnn_feats, nnmf_coeffs, stats: ScalerStats, labels=None) -> HybridFeatures:
    """Concatenate [CNN | NNMF] columns and standardize with train-fitted ``stats``.

    ``nnmf_coeffs`` is (n, k), i.e. the transpose of the NNMF H matrix.
    """
    raw = concat_features(cnn_feats, nnmf_coeffs)
    f, k = np.shape(cnn_feats)[1], np.shape(nnmf_coeffs)[1]
    if stats.cnn_dim and (stats.cnn_dim, stats.nnmf_k) != (f, k):
        raise DimMismatch(f"layout [{f} | {k}] does not match scaler layout "
                          f"[{stats.cnn_dim} | {stats.nnmf_k}]")
    labels = np.zeros(len(raw), dtype=np.int64) if labels is None else np.asarray(labels)
    return HybridFeatures(apply_scaler(raw, stats), labels, f, k)
