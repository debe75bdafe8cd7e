"""Feature-space diffusion: noise schedule, x0-predicting denoiser, purification."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import BadRange, EmptyDataset, StepOutOfRange, ValidationError
from .nn.model import ModelParams, backward, forward, init_model, mlp_layers, softmax
from .nn.optim import OptimState, optimizer_step
from .nn.training import batches
from .rng import SplitMix64, derive_seed

log = logging.getLogger(__name__)


@dataclass
class NoiseSchedule:
    betas: np.ndarray
    alpha_bars: np.ndarray

    @property
    def T(self):
        return len(self.betas)

    def alpha_bar(self, t):
        """Cumulative product at step t (array-friendly); alpha_bar(0) == 1."""
        t = np.asarray(t)
        if np.any(t < 0) or np.any(t > self.T):
            raise StepOutOfRange(f"step {t} outside [0, {self.T}]")
        return np.where(t == 0, 1.0, self.alpha_bars[np.maximum(t, 1) - 1])


def build_schedule(T=50, beta_start=1e-4, beta_end=0.02) -> NoiseSchedule:
    if T < 1:
        raise BadRange(f"T must be >= 1, got {T}")
    if not 0 < beta_start <= beta_end < 1:
        raise BadRange(f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}")
    betas = np.linspace(beta_start, beta_end, T) if T > 1 else np.array([beta_start])
    return NoiseSchedule(betas, np.cumprod(1.0 - betas))


def forward_diffuse(x0, t, eps, schedule: NoiseSchedule):
    """x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps; ``t`` may be per-row."""
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != x0.shape:
        raise ValidationError(f"eps shape {eps.shape} != x0 shape {x0.shape}")
    t = np.asarray(t)
    if np.any(t < 1) or np.any(t > schedule.T):
        raise StepOutOfRange(f"step must be in [1, {schedule.T}]")
    ab = schedule.alpha_bars[t - 1]
    if ab.ndim == 1 and x0.ndim == 2:
        ab = ab[:, None]
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


def timestep_embedding(t, T, dim=16):
    """Sinusoidal code of t/T at octave frequencies pi * 2**j; shape (n, dim)."""
    s = np.atleast_1d(np.asarray(t, dtype=np.float64)) / T
    freqs = np.pi * 2.0 ** np.arange(dim // 2)
    ang = s[:, None] * freqs
    return np.hstack([np.sin(ang), np.cos(ang)])


@dataclass
class DenoiserModel:
    params: ModelParams
    feature_dim: int
    t_embed_dim: int = 16


@dataclass
class DenoiserConfig:
    epochs: int = 100
    batch_size: int = 64
    learning_rate: float = 1e-3
    hidden: int = 256
    t_embed_dim: int = 16
    seed: int = 0


@dataclass
class DenoiserResult:
    denoiser: DenoiserModel
    loss_trace: list = field(default_factory=list)
    val_trace: list = field(default_factory=list)
    best_epoch: int = -1


def init_denoiser(feature_dim, hidden=256, t_embed_dim=16, seed=0) -> DenoiserModel:
    params = init_model(mlp_layers([feature_dim + t_embed_dim, hidden, hidden, feature_dim]),
                        (feature_dim + t_embed_dim,), seed)
    params.meta = {"feature_dim": feature_dim, "t_embed_dim": t_embed_dim}
    return DenoiserModel(params, feature_dim, t_embed_dim)


def denoiser_from_params(params: ModelParams) -> DenoiserModel:
    return DenoiserModel(params, params.meta["feature_dim"], params.meta["t_embed_dim"])


def _denoiser_input(x_t, t, T, dim):
    t = np.broadcast_to(np.asarray(t), (len(x_t),))
    return np.hstack([x_t, timestep_embedding(t, T, dim)])


def denoise(den: DenoiserModel, x_t, t, T, batch_size=1024):
    """Predicted clean features for noisy rows ``x_t`` at step(s) ``t``."""
    t = np.broadcast_to(np.asarray(t), (len(x_t),))
    out = []
    for s in range(0, len(x_t), batch_size):
        inp = _denoiser_input(x_t[s:s + batch_size], t[s:s + batch_size], T, den.t_embed_dim)
        out.append(forward(den.params, inp)[0])
    return np.concatenate(out) if out else np.zeros((0, den.feature_dim))


def _draw(n, dim, T, seed, *key):
    rng = SplitMix64(derive_seed(seed, *key))
    t = 1 + rng.integers(T, n)
    eps = rng.normal((n, dim))
    return t, eps


def _mse(den, x0, t, eps, schedule):
    pred = denoise(den, forward_diffuse(x0, t, eps, schedule), t, schedule.T)
    return float(((pred - x0) ** 2).mean())


def train_denoiser(train_features, schedule: NoiseSchedule, config: DenoiserConfig,
                   validation=None) -> DenoiserResult:
    """Fit an MLP mapping (x_t, embed(t)) to x0 under mean-squared error.

    Each example gets a fresh t ~ U{1..T} and eps ~ N(0, I) per epoch. The
    returned model is the snapshot with lowest validation MSE (validation
    noise is drawn once and reused), or the last epoch without validation.
    """
    x = np.asarray(train_features, dtype=np.float64)
    if x.ndim != 2 or len(x) == 0:
        raise EmptyDataset("denoiser training set is empty")
    if not np.all(np.isfinite(x)):
        raise ValidationError("training features contain non-finite values")
    n, dim = x.shape
    den = init_denoiser(dim, config.hidden, config.t_embed_dim, derive_seed(config.seed, "init"))
    state = OptimState("adam", config.learning_rate)
    result = DenoiserResult(den)
    if validation is not None:
        validation = np.asarray(validation, dtype=np.float64)
        val_t, val_eps = _draw(len(validation), dim, schedule.T, config.seed, "val")
    best = None
    best_val = np.inf
    for epoch in range(config.epochs):
        t_all, eps_all = _draw(n, dim, schedule.T, config.seed, "epoch", epoch)
        total = 0.0
        for idx in batches(n, config.batch_size, config.seed, epoch):
            x0 = x[idx]
            x_t = forward_diffuse(x0, t_all[idx], eps_all[idx], schedule)
            inp = _denoiser_input(x_t, t_all[idx], schedule.T, den.t_embed_dim)
            pred, _, cache = forward(den.params, inp)
            diff = pred - x0
            total += float((diff ** 2).sum())
            grads, _ = backward(den.params, cache, 2.0 * diff / diff.size)
            optimizer_step(den.params, grads, state)
        result.loss_trace.append(total / x.size)
        if validation is not None:
            v = _mse(den, validation, val_t, val_eps, schedule)
            result.val_trace.append(v)
            if v < best_val:
                best_val, result.best_epoch = v, epoch
                best = DenoiserModel(den.params.copy(), dim, den.t_embed_dim)
            log.info("denoiser epoch %d mse %.5f val %.5f", epoch, result.loss_trace[-1], v)
        else:
            log.info("denoiser epoch %d mse %.5f", epoch, result.loss_trace[-1])
    result.denoiser = best if best is not None else den
    return result


def purify_classify(features, denoiser: DenoiserModel, classifier: ModelParams,
                    schedule: NoiseSchedule, t_inf=10, m_passes=10, seed=0,
                    noise_scale=1.0):
    """Average of ``m_passes`` softmax outputs over noise -> denoise -> classify.

    ``noise_scale`` multiplies the drawn noise; 0 gives the deterministic
    sqrt(abar) x0 branch.
    """
    x = np.asarray(features, dtype=np.float64)
    if not 1 <= t_inf <= schedule.T:
        raise StepOutOfRange(f"t_inf={t_inf} outside [1, {schedule.T}]")
    if m_passes < 1:
        raise ValidationError("m_passes must be >= 1")
    acc = None
    for p in range(m_passes):
        eps = noise_scale * SplitMix64(derive_seed(seed, "purify", p)).normal(x.shape)
        x_hat = denoise(denoiser, forward_diffuse(x, t_inf, eps, schedule), t_inf, schedule.T)
        probs = softmax(forward(classifier, x_hat)[0])
        acc = probs if acc is None else acc + probs
    return acc / m_passes
