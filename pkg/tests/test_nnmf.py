import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybriddefense.errors import NegativeInput, RankTooLarge, ShapeMismatch
from hybriddefense.nnmf import nnmf_fit, nnmf_project, objective, reconstruct


def rel_err(V, fp):
    return np.linalg.norm(V - fp.W @ fp.H) / np.linalg.norm(V)


def test_rank_one_recovered():
    rs = np.random.default_rng(0)
    V = np.outer(rs.random(30) + 0.1, rs.random(20) + 0.1)
    fp = nnmf_fit(V, k=1, max_iters=500, tol=0)
    assert rel_err(V, fp) < 1e-3


def test_negative_entry_located():
    V = np.ones((4, 5))
    V[2, 3] = -0.1
    with pytest.raises(NegativeInput, match=r"\[2, 3\]"):
        nnmf_fit(V, k=2)


def test_rank_too_large():
    with pytest.raises(RankTooLarge):
        nnmf_fit(np.ones((4, 5)), k=5)
    with pytest.raises(RankTooLarge):
        nnmf_fit(np.ones((4, 5)), k=0)


def test_monotone_on_random_50x40():
    V = np.random.default_rng(1).random((50, 40))
    fp = nnmf_fit(V, k=10, max_iters=500, tol=0)
    assert len(fp.objective_trace) == 501
    assert np.diff(fp.objective_trace).max() <= 1e-10
    assert fp.W.min() >= 0 and fp.H.min() >= 0


@settings(max_examples=20, deadline=None)
@given(d=st.integers(2, 12), n=st.integers(2, 12), seed=st.integers(0, 1000),
       zero_frac=st.floats(0, 0.6))
def test_monotone_and_nonnegative_property(d, n, seed, zero_frac):
    rs = np.random.default_rng(seed)
    V = rs.random((d, n)) * (rs.random((d, n)) >= zero_frac)
    k = int(rs.integers(1, min(d, n) + 1))
    fp = nnmf_fit(V, k=k, max_iters=60, tol=0, seed=seed)
    assert np.diff(fp.objective_trace).max() <= 1e-10
    assert fp.W.min() >= 0 and fp.H.min() >= 0


def test_tolerance_stops_early():
    V = np.random.default_rng(2).random((20, 15))
    fp = nnmf_fit(V, k=3, max_iters=5000, tol=1e-4)
    assert len(fp.objective_trace) < 5001
    t = fp.objective_trace
    assert (t[-2] - t[-1]) / t[-2] < 1e-4


def test_fit_deterministic():
    V = np.random.default_rng(3).random((10, 8))
    a, b = nnmf_fit(V, 3, 50, seed=4), nnmf_fit(V, 3, 50, seed=4)
    assert np.array_equal(a.W, b.W) and np.array_equal(a.H, b.H)


def test_projection_recovers_known_coefficients():
    rs = np.random.default_rng(5)
    W = rs.random((60, 5))
    h = rs.random((5, 3))
    W0 = W.copy()
    H = nnmf_project(W, W @ h, iters=2000)
    assert np.array_equal(W, W0)
    assert np.linalg.norm(H - h) / np.linalg.norm(h) < 1e-2


def test_projection_of_zeros_decays():
    W = np.random.default_rng(6).random((30, 4))
    H = nnmf_project(W, np.zeros((30, 5)))
    assert np.linalg.norm(H) < 1e-3


def test_self_projection_objective_close_to_fit():
    V = np.random.default_rng(7).random((40, 30))
    fp = nnmf_fit(V, k=5, max_iters=300, tol=0)
    H = nnmf_project(fp.W, V, iters=200)
    fit_obj = fp.objective_trace[-1]
    assert abs(objective(V, fp.W, H) - fit_obj) <= 0.05 * fit_obj


def test_projection_errors():
    W = np.ones((4, 2))
    with pytest.raises(ShapeMismatch):
        nnmf_project(W, np.ones((5, 3)))
    with pytest.raises(NegativeInput):
        nnmf_project(W, -np.ones((4, 3)))


def test_objective_scalar_oracle():
    rs = np.random.default_rng(8)
    V, W, H = rs.random((5, 4)), rs.random((5, 2)), rs.random((2, 4))
    total = 0.0
    for i in range(5):
        for j in range(4):
            r = V[i, j] - sum(W[i, c] * H[c, j] for c in range(2))
            total += r * r
    assert abs(objective(V, W, H) - total) < 1e-12


def test_objective_trivial_cases():
    rs = np.random.default_rng(9)
    V, W = rs.random((5, 4)), rs.random((5, 2))
    assert not reconstruct(W, np.zeros((2, 4))).any()
    assert objective(V, W, np.zeros((2, 4))) == pytest.approx((V ** 2).sum(), rel=1e-15)
    H = rs.random((2, 4))
    assert objective(W @ H, W, H) <= 1e-18
    with pytest.raises(ShapeMismatch):
        reconstruct(W, np.zeros((3, 4)))
