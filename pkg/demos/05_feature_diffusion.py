"""
Diffusion in feature space
==========================

A linear noise schedule, the closed-form forward corruption, an MLP that
predicts the clean vector, and purification by averaging predictions over
several partially noised copies.
"""

import numpy as np

from hybriddefense.diffusion import (
    DenoiserConfig,
    build_schedule,
    denoise,
    forward_diffuse,
    purify_classify,
    train_denoiser,
)
from hybriddefense.nn import TrainConfig, init_model, mlp_layers, train
from hybriddefense.rng import SplitMix64

schedule = build_schedule(T=50, beta_start=1e-4, beta_end=0.02)
print("alpha_bar at t=1, 10, 50:", schedule.alpha_bar([1, 10, 50]).round(4))

# three Gaussian clusters stand in for hybrid features
rng = SplitMix64(0)
centers = 3 * rng.normal((3, 8))
labels = rng.integers(3, 1200)
x = centers[labels] + 0.5 * rng.normal((1200, 8))

# closed-form corruption: x_t = sqrt(abar) x0 + sqrt(1 - abar) eps
eps = rng.normal(x.shape)
x_t = forward_diffuse(x, 25, eps, schedule)
print("signal kept at t=25:", np.sqrt(schedule.alpha_bar(25)).round(3))

den = train_denoiser(x[:1000], schedule, DenoiserConfig(epochs=40, hidden=64, seed=1),
                     validation=x[1000:]).denoiser
x_hat = denoise(den, x_t[1000:], 25, schedule.T)
naive = x_t[1000:] / np.sqrt(schedule.alpha_bar(25))  # undo the shrink, keep the noise
print("mse rescaled x_t", ((naive - x[1000:]) ** 2).mean().round(3),
      "denoised", ((x_hat - x[1000:]) ** 2).mean().round(3))

# purify then classify, averaging softmax outputs over ten noisy passes
clf = train(init_model(mlp_layers([8, 32, 3]), (8,)), x[:1000], labels[:1000],
            TrainConfig(epochs=5)).model
probs = purify_classify(x[1000:], den, clf, schedule, t_inf=10, m_passes=10, seed=2)
print("rows sum to one:", np.allclose(probs.sum(axis=1), 1),
      "accuracy", (probs.argmax(axis=1) == labels[1000:]).mean())
