"""Frobenius-norm NNMF via Lee-Seung multiplicative updates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NegativeInput, RankTooLarge, ShapeMismatch, ValidationError
from .rng import SplitMix64, derive_seed

DELTA = 1e-12  # denominator floor


@dataclass
class FactorPair:
    W: np.ndarray  # (d, k)
    H: np.ndarray  # (k, n)
    objective_trace: list = field(default_factory=list)

    @property
    def k(self):
        return self.W.shape[1]


def _check_nonneg(V, what="V"):
    V = np.asarray(V, dtype=np.float64)
    neg = np.argwhere(V < 0)
    if len(neg):
        i = tuple(int(v) for v in neg[0])
        raise NegativeInput(f"{what}{list(i)} = {V[i]} is negative")
    if not np.all(np.isfinite(V)):
        raise ValidationError(f"{what} has non-finite entries")
    return V


def reconstruct(W, H):
    if W.shape[1] != H.shape[0]:
        raise ShapeMismatch(f"W {W.shape} and H {H.shape} do not compose")
    return W @ H


def objective(V, W, H) -> float:
    """Squared Frobenius reconstruction error ||V - WH||^2."""
    V_hat = reconstruct(W, H)
    if V_hat.shape != V.shape:
        raise ShapeMismatch(f"WH is {V_hat.shape}, V is {V.shape}")
    r = V - V_hat
    return float(np.einsum("ij,ij->", r, r))


def _update_h(V, W, H):
    return H * (W.T @ V) / (W.T @ W @ H + DELTA)


def _update_w(V, W, H):
    return W * (V @ H.T) / (W @ (H @ H.T) + DELTA)


def nnmf_fit(V, k=30, max_iters=500, tol=1e-6, seed=0) -> FactorPair:
    """Factor V (d x n) into non-negative W (d x k) and H (k x n).

    ``objective_trace[0]`` is the objective at the random initialization and
    entry i the objective after i full (H, W) update pairs. Iteration stops
    after ``max_iters`` pairs or once the relative decrease drops below ``tol``.
    """
    V = _check_nonneg(V)
    d, n = V.shape
    if not 1 <= k <= min(d, n):
        raise RankTooLarge(f"k={k} must be in [1, min(d, n)={min(d, n)}]")
    if max_iters < 1:
        raise ValidationError("max_iters must be >= 1")
    rng = SplitMix64(derive_seed(seed, "nnmf"))
    W = rng.uniform((d, k))
    H = rng.uniform((k, n))
    trace = [objective(V, W, H)]
    for _ in range(max_iters):
        H = _update_h(V, W, H)
        W = _update_w(V, W, H)
        trace.append(objective(V, W, H))
        prev, cur = trace[-2], trace[-1]
        if prev > 0 and (prev - cur) / prev < tol:
            break
    return FactorPair(W, H, trace)


def nnmf_project(W, V_new, iters=200, seed=0) -> np.ndarray:
    """Coefficients (k x m) for new columns with the basis W held fixed."""
    W = _check_nonneg(W, "W")
    V_new = _check_nonneg(V_new, "V_new")
    if V_new.ndim != 2 or V_new.shape[0] != W.shape[0]:
        raise ShapeMismatch(f"V_new {V_new.shape} rows must equal W rows {W.shape[0]}")
    H = SplitMix64(derive_seed(seed, "nnmf-project")).uniform((W.shape[1], V_new.shape[1]))
    WtV = W.T @ V_new
    WtW = W.T @ W
    for _ in range(iters):
        H = H * WtV / (WtW @ H + DELTA)
    return H
