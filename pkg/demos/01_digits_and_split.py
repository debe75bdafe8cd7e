"""
Synthetic digits, IDX files and a stratified split
==================================================

"""

import tempfile
from pathlib import Path

import numpy as np

from hybriddefense import data as D

# the ten stroke templates shipped with the package
templates = D.load_templates()
print(templates.shape)
for row in templates[3][6:22:2]:
    print("".join("#" if v else "." for v in row[4:24]))

# jittered copies: rotation, scale, shear, shift, stroke width, elastic warp
digits = D.generate_synthetic(D.SynthSpec(samples_per_class=50, seed=1))
print(len(digits), digits.images.min(), digits.images.max())

# write and re-read them as MNIST-style IDX files (8-bit pixels)
tmp = Path(tempfile.mkdtemp())
D.write_idx(np.rint(digits.images * 255), digits.labels, tmp / "img.idx", tmp / "lab.idx")
loaded = D.load_idx(tmp / "img.idx", tmp / "lab.idx")
print(np.abs(loaded.images - digits.images).max() <= 0.5 / 255)

# 70/15/15 per class
split = D.stratified_split(loaded, (0.70, 0.15, 0.15), seed=7)
for part in (split.train, split.validation, split.test):
    print(part.role, len(part), np.bincount(part.labels))

# images as columns, ready for NNMF
V = D.vectorize(split.train)
print(V.shape)
