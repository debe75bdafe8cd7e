"""
The nine report metrics
=======================

"""

import numpy as np

from hybriddefense.metrics import classification_metrics, confusion, metric_row

cm = confusion([0, 0, 0, 1, 1, 1], [0, 0, 1, 1, 1, 1], num_classes=2)
print(cm.counts)
print({k: round(float(v), 4) for k, v in classification_metrics(cm).items()})

# uniform probabilities: log-loss ln 10, Brier 0.9
y = np.arange(10).repeat(3)
print(metric_row(np.full((30, 10), 0.1), y))

# a confident, mostly right model
rng = np.random.default_rng(0)
logits = rng.normal(size=(30, 10))
logits[np.arange(30), y] += 4
p = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
for k, v in metric_row(p, y).as_dict().items():
    print(f"{k:>12} {v:.4f}")
