"""
Parts-based codes with multiplicative-update NNMF
=================================================

"""

import numpy as np

from hybriddefense import data as D
from hybriddefense.nnmf import nnmf_fit, nnmf_project

split = D.stratified_split(D.generate_synthetic(D.SynthSpec(samples_per_class=60, seed=3)))
V = D.vectorize(split.train)

fp = nnmf_fit(V, k=30, max_iters=200, tol=1e-6, seed=0)
trace = np.asarray(fp.objective_trace)
print("iterations", len(trace) - 1, "objective", trace[0].round(1), "->", trace[-1].round(1))
print("never increases:", np.diff(trace).max() <= 1e-10)

# each basis column is a non-negative stroke fragment
part = fp.W[:, 0].reshape(28, 28)
for row in part[4:24:2]:
    print("".join("#" if v > part.max() / 3 else "." for v in row[4:24]))

# unseen images are coded against the frozen basis
H_test = nnmf_project(fp.W, D.vectorize(split.test), iters=200)
rel = np.linalg.norm(D.vectorize(split.test) - fp.W @ H_test) / np.linalg.norm(D.vectorize(split.test))
print("test codes", H_test.shape, "relative reconstruction error", round(float(rel), 3))
