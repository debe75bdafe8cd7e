"""
APGD against the baseline CNN
=============================

"""

import numpy as np

from hybriddefense import data as D
from hybriddefense.attacks import AttackConfig, checkpoints, predict, worst_case_attack
from hybriddefense.nn import TrainConfig, cnn_layers, init_model, train

split = D.stratified_split(D.generate_synthetic(D.SynthSpec(samples_per_class=150, seed=6)))
cnn = train(init_model(cnn_layers(), (1, 28, 28), seed=0), split.train.images,
            split.train.labels, TrainConfig(epochs=3)).model

x, y = split.test.images[:100], split.test.labels[:100]
print("clean accuracy", (predict(cnn, x) == y).mean())

# iterations where the step size is reviewed
print(checkpoints(100))

cfg = AttackConfig(epsilon=0.1, n_iters=50)
batch = worst_case_attack(cnn, x, y, cfg, seed=0)
print("attacked accuracy", (predict(cnn, batch.x_adv) == y).mean())
print("largest pixel change", np.abs(batch.x_adv - x).max())
print("kept from CE:", batch.source_loss.count("ce"), "from DLR:", batch.source_loss.count("dlr"))
