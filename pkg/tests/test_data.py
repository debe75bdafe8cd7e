import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybriddefense import data as D
from hybriddefense.errors import (
    CountMismatch,
    InsufficientClassSamples,
    MagicMismatch,
    TruncatedFile,
    ValidationError,
)


def write_pair(tmp_path, images, labels):
    ip, lp = tmp_path / "img.idx", tmp_path / "lab.idx"
    D.write_idx(images, labels, ip, lp)
    return ip, lp


def test_idx_round_trip_four_images(tmp_path, rng):
    imgs = rng.integers(0, 256, size=(4, 28, 28), dtype=np.uint8)
    labels = np.array([3, 1, 4, 1])
    ip, lp = write_pair(tmp_path, imgs, labels)
    s = D.load_idx(ip, lp)
    assert len(s) == 4 and s.images.shape == (4, 28, 28)
    assert np.array_equal(s.labels, labels)
    assert np.array_equal(np.rint(s.images * 255).astype(np.uint8), imgs)


def test_idx_header_bytes_are_big_endian(tmp_path):
    ip, lp = write_pair(tmp_path, np.zeros((2, 28, 28), np.uint8), [0, 1])
    assert ip.read_bytes()[:16] == bytes.fromhex("00000803" "00000002" "0000001c" "0000001c")
    assert lp.read_bytes()[:8] == bytes.fromhex("00000801" "00000002")


def test_pixel_255_is_exactly_one(tmp_path):
    imgs = np.zeros((1, 28, 28), np.uint8)
    imgs[0, 5, 7] = 255
    s = D.load_idx(*write_pair(tmp_path, imgs, [0]))
    assert s.images[0, 5, 7] == 1.0
    assert s.images.min() == 0.0


def test_wrong_image_magic(tmp_path):
    ip, lp = write_pair(tmp_path, np.zeros((1, 28, 28), np.uint8), [0])
    buf = bytearray(ip.read_bytes())
    buf[:4] = struct.pack(">I", 0x801)
    ip.write_bytes(bytes(buf))
    with pytest.raises(MagicMismatch, match="img.idx.*offset 0"):
        D.load_idx(ip, lp)


def test_count_mismatch(tmp_path):
    ip, _ = write_pair(tmp_path, np.zeros((3, 28, 28), np.uint8), [0, 1, 2])
    lp = tmp_path / "other.idx"
    D.write_idx(np.zeros((2, 28, 28), np.uint8), [0, 1], tmp_path / "x.idx", lp)
    with pytest.raises(CountMismatch):
        D.load_idx(ip, lp)


def test_truncated_payload(tmp_path):
    ip, lp = write_pair(tmp_path, np.zeros((3, 28, 28), np.uint8), [0, 1, 2])
    ip.write_bytes(ip.read_bytes()[:-10])
    with pytest.raises(TruncatedFile, match="img.idx"):
        D.load_idx(ip, lp)
    ip.write_bytes(b"\x00\x00")
    with pytest.raises(TruncatedFile):
        D.load_idx(ip, lp)


def test_non_28_side_rejected(tmp_path):
    ip, lp = write_pair(tmp_path, np.zeros((1, 14, 14), np.uint8), [0])
    with pytest.raises(ValidationError, match="28x28"):
        D.load_idx(ip, lp)


def test_templates_asset_shape():
    t = D.load_templates()
    assert t.shape == (10, 28, 28)
    assert set(np.unique(t)) == {0.0, 1.0}
    # every digit is distinct
    flat = t.reshape(10, -1)
    assert len({row.tobytes() for row in flat}) == 10


def test_zero_jitter_reproduces_templates():
    spec = D.SynthSpec(samples_per_class=1, max_shift=0, max_rotation=0, pixel_noise_sigma=0,
                       max_scale=0, max_shear=0, stroke_jitter=0, elastic_alpha=0)
    s = D.generate_synthetic(spec)
    assert np.array_equal(s.images, D.load_templates())
    assert s.labels.tolist() == list(range(10))


def test_synthetic_deterministic_and_seed_sensitive():
    a = D.generate_synthetic(D.SynthSpec(samples_per_class=5, seed=4))
    b = D.generate_synthetic(D.SynthSpec(samples_per_class=5, seed=4))
    c = D.generate_synthetic(D.SynthSpec(samples_per_class=5, seed=5))
    assert np.array_equal(a.images, b.images)
    assert not np.array_equal(a.images, c.images)


def test_noisy_synthetic_is_clamped():
    s = D.generate_synthetic(D.SynthSpec(samples_per_class=10, pixel_noise_sigma=0.1))
    assert s.images.min() >= 0.0 and s.images.max() <= 1.0
    # noise actually reached the clamp on both ends
    assert (s.images == 0).any() and (s.images == 1).any()


def test_synth_spec_validation():
    with pytest.raises(ValidationError):
        D.generate_synthetic(D.SynthSpec(samples_per_class=0))
    with pytest.raises(ValidationError):
        D.generate_synthetic(D.SynthSpec(pixel_noise_sigma=-0.1))


def balanced(per_class, seed=0):
    labels = np.repeat(np.arange(10), per_class)
    images = np.random.default_rng(seed).random((len(labels), 28, 28))
    return D.LabeledImageSet(images, labels)


def test_split_counts_seven_thousand():
    s = D.stratified_split(balanced(1000), (0.70, 0.15, 0.15), seed=1)
    assert (len(s.train), len(s.validation), len(s.test)) == (7000, 1500, 1500)


def test_split_needs_three_per_class():
    with pytest.raises(InsufficientClassSamples):
        D.stratified_split(balanced(1), (0.34, 0.33, 0.33))


def test_split_rejects_bad_ratios():
    with pytest.raises(ValidationError):
        D.stratified_split(balanced(5), (0.5, 0.5, 0.1))


def test_split_deterministic():
    a = D.stratified_split(balanced(20), seed=8)
    b = D.stratified_split(balanced(20), seed=8)
    c = D.stratified_split(balanced(20), seed=9)
    for k in ("train", "validation", "test"):
        assert np.array_equal(a.indices[k], b.indices[k])
    assert not np.array_equal(a.indices["train"], c.indices["train"])


@settings(max_examples=40, deadline=None)
@given(counts=st.lists(st.integers(3, 40), min_size=2, max_size=6),
       r=st.tuples(st.integers(1, 20), st.integers(1, 20), st.integers(1, 20)),
       seed=st.integers(0, 2**32))
def test_split_invariants(counts, r, seed):
    labels = np.concatenate([np.full(c, k) for k, c in enumerate(counts)])
    data = D.LabeledImageSet(np.zeros((len(labels), 28, 28)), labels, num_classes=len(counts))
    ratios = np.array(r, dtype=float) / sum(r)
    s = D.stratified_split(data, ratios, seed)
    idx = np.concatenate([s.indices[k] for k in ("train", "validation", "test")])
    # disjoint and covering
    assert sorted(idx.tolist()) == list(range(len(labels)))
    for part, ratio in zip((s.train, s.validation, s.test), ratios):
        for k, c in enumerate(counts):
            assert abs((part.labels == k).sum() - ratio * c) <= 1


def test_vectorize_shape_and_round_trip(rng):
    imgs = rng.random((5, 28, 28))
    imgs[2] = 0
    V = D.vectorize(D.LabeledImageSet(imgs, np.zeros(5, int)))
    assert V.shape == (784, 5)
    assert not V[:, 2].any()
    for j in range(5):
        assert np.array_equal(V[:, j].reshape(28, 28), imgs[j])


def test_labeled_set_invariants():
    with pytest.raises(ValidationError):
        D.LabeledImageSet(np.full((1, 28, 28), 1.5), [0])
    with pytest.raises(ValidationError):
        D.LabeledImageSet(np.zeros((1, 28, 28)), [10])
    with pytest.raises(CountMismatch):
        D.LabeledImageSet(np.zeros((2, 28, 28)), [0])
