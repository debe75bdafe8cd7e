"""
The hybrid feature space
========================

CNN feature-layer activations and NNMF coefficients side by side, z-scored
with statistics from the training rows only.
"""

import numpy as np

from hybriddefense import data as D
from hybriddefense.features import build_hybrid, concat_features, extract_cnn_features, fit_scaler
from hybriddefense.nn import TrainConfig, cnn_layers, init_model, train
from hybriddefense.nnmf import nnmf_fit, nnmf_project

split = D.stratified_split(D.generate_synthetic(D.SynthSpec(samples_per_class=80, seed=4)))
cnn = train(init_model(cnn_layers(), (1, 28, 28), seed=0), split.train.images,
            split.train.labels, TrainConfig(epochs=2)).model
fp = nnmf_fit(D.vectorize(split.train), k=30, max_iters=100)

train_raw = concat_features(extract_cnn_features(cnn, split.train.images), fp.H.T)
stats = fit_scaler(train_raw, cnn_dim=128, nnmf_k=30)
print("width", stats.dim, "layout", stats.layout)

test = build_hybrid(extract_cnn_features(cnn, split.test.images),
                    nnmf_project(fp.W, D.vectorize(split.test)).T, stats, split.test.labels)
print(test.matrix.shape, "CNN block", test.cnn_dim, "NNMF block", test.nnmf_k)

# floored columns are dead ReLU units
print("dead units", int((stats.std == 1e-8).sum()))
print("test column means", np.round(test.matrix.mean(axis=0)[:5], 2))
