"""
Training the baseline CNN and saving it
=======================================

"""

import tempfile
from pathlib import Path

import numpy as np

from hybriddefense import data as D
from hybriddefense.nn import (
    TrainConfig,
    cnn_layers,
    forward,
    init_model,
    load_checkpoint,
    save_checkpoint,
    train,
)

split = D.stratified_split(D.generate_synthetic(D.SynthSpec(samples_per_class=150, seed=2)))

# conv-relu-pool x2, then the tagged 128-unit feature layer and a 10-way head
model = init_model(cnn_layers(), (1, 28, 28), seed=0)
for name, t in model.tensors.items():
    print(name, t.shape)

result = train(model, split.train.images, split.train.labels, TrainConfig(epochs=3),
               validation=(split.validation.images, split.validation.labels))
print("loss per epoch", np.round(result.loss_trace, 3))
print("best validation accuracy", result.best_val, "at epoch", result.best_epoch)

# logits and the post-ReLU feature-layer activations come out of one pass
logits, features, _ = forward(result.model, split.test.images[:5])
print(logits.argmax(axis=1), split.test.labels[:5], features.shape)

# NTF checkpoints reload bit-exactly
path = Path(tempfile.mkdtemp()) / "cnn.ntf"
save_checkpoint(result.model, path)
print(load_checkpoint(path).equals(result.model), path.stat().st_size, "bytes")
