"""Digit images: IDX reader/writer, synthetic generator, stratified split."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import (
    CountMismatch,
    InsufficientClassSamples,
    MagicMismatch,
    TruncatedFile,
    ValidationError,
)
from .rng import SplitMix64, derive_seed

SIDE = 28
NUM_CLASSES = 10
IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


@dataclass
class LabeledImageSet:
    images: np.ndarray  # (n, H, W) float64 in [0, 1]
    labels: np.ndarray  # (n,) int64
    num_classes: int = NUM_CLASSES
    role: str = "full"

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 3:
            raise ValidationError(f"images must be (n, H, W), got {self.images.shape}")
        if len(self.images) != len(self.labels):
            raise CountMismatch(f"{len(self.images)} images vs {len(self.labels)} labels")
        if self.images.size and (self.images.min() < 0 or self.images.max() > 1):
            raise ValidationError("pixel values outside [0, 1]")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValidationError(f"labels outside [0, {self.num_classes - 1}]")

    def __len__(self):
        return len(self.labels)

    def subset(self, idx, role=None) -> "LabeledImageSet":
        return LabeledImageSet(self.images[idx], self.labels[idx], self.num_classes,
                               role or self.role)


@dataclass
class DataSplit:
    train: LabeledImageSet
    validation: LabeledImageSet
    test: LabeledImageSet
    seed: int
    # indices into the source set, kept for the disjointness/coverage checks
    indices: dict = field(default_factory=dict)


@dataclass
class SynthSpec:
    """Synthetic digit recipe. Every jitter knob at 0 reproduces the templates."""

    samples_per_class: int = 1000
    max_shift: float = 2.5  # pixels
    max_rotation: float = 15.0  # degrees
    pixel_noise_sigma: float = 0.0
    seed: int = 0
    max_scale: float = 0.12  # relative, per axis
    max_shear: float = 0.25
    stroke_jitter: float = 0.10  # spread of the re-thresholding level
    elastic_alpha: float = 22.0  # displacement field scale (pixels before smoothing)
    elastic_sigma: float = 4.0

    def validate(self):
        if self.samples_per_class < 1:
            raise ValidationError("samples_per_class must be >= 1")
        if self.pixel_noise_sigma < 0:
            raise ValidationError("pixel_noise_sigma must be >= 0")
        for name in ("max_shift", "max_rotation", "max_scale", "max_shear", "stroke_jitter",
                     "elastic_alpha"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")
        if self.max_scale >= 1 or self.stroke_jitter >= 0.5:
            raise ValidationError("max_scale must be < 1 and stroke_jitter < 0.5")
        if self.elastic_sigma <= 0:
            raise ValidationError("elastic_sigma must be > 0")


# ---------------------------------------------------------------------------
# IDX files

def _read_header(path, buf, magic_expected, ndims):
    if len(buf) < 4 + 4 * ndims:
        raise TruncatedFile(f"{path}: header truncated at offset {len(buf)}")
    magic = struct.unpack_from(">I", buf, 0)[0]
    if magic != magic_expected:
        raise MagicMismatch(
            f"{path}: magic 0x{magic:08x} at offset 0, expected 0x{magic_expected:08x}")
    return struct.unpack_from(f">{ndims}I", buf, 4)


def load_idx(images_path, labels_path, num_classes=NUM_CLASSES) -> LabeledImageSet:
    """Read an MNIST-style IDX image/label pair; pixels are scaled by 1/255."""
    images_path, labels_path = Path(images_path), Path(labels_path)
    ibuf = images_path.read_bytes()
    lbuf = labels_path.read_bytes()
    n, rows, cols = _read_header(images_path, ibuf, IMAGES_MAGIC, 3)
    (m,) = _read_header(labels_path, lbuf, LABELS_MAGIC, 1)
    if (rows, cols) != (SIDE, SIDE):
        raise ValidationError(f"{images_path}: images are {rows}x{cols}, only {SIDE}x{SIDE} supported")
    if n != m:
        raise CountMismatch(f"{images_path} holds {n} images but {labels_path} holds {m} labels "
                            f"(count field at offset 4)")
    need = 16 + n * rows * cols
    if len(ibuf) < need:
        raise TruncatedFile(f"{images_path}: payload ends at offset {len(ibuf)}, expected {need}")
    if len(lbuf) < 8 + m:
        raise TruncatedFile(f"{labels_path}: payload ends at offset {len(lbuf)}, expected {8 + m}")
    pixels = np.frombuffer(ibuf, dtype=np.uint8, count=n * rows * cols, offset=16)
    labels = np.frombuffer(lbuf, dtype=np.uint8, count=m, offset=8).astype(np.int64)
    bad = np.flatnonzero(labels >= num_classes)
    if bad.size:
        raise ValidationError(f"{labels_path}: label {labels[bad[0]]} at offset {8 + bad[0]} "
                              f">= {num_classes}")
    images = pixels.reshape(n, rows, cols).astype(np.float64) / 255.0
    return LabeledImageSet(images, labels, num_classes)


def write_idx(images_u8, labels, images_path, labels_path):
    """Write uint8 images (n, H, W) and labels (n,) in IDX format."""
    images_u8 = np.asarray(images_u8, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, rows, cols = images_u8.shape
    Path(images_path).write_bytes(struct.pack(">4I", IMAGES_MAGIC, n, rows, cols)
                                  + images_u8.tobytes())
    Path(labels_path).write_bytes(struct.pack(">2I", LABELS_MAGIC, len(labels)) + labels.tobytes())


# ---------------------------------------------------------------------------
# synthetic digits

def load_templates() -> np.ndarray:
    """The ten 28x28 binary stroke masks, shape (10, 28, 28)."""
    text = resources.files(__package__).joinpath("templates.txt").read_text()
    rows = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if len(rows) != NUM_CLASSES * SIDE or any(len(r) != SIDE for r in rows):
        raise ValidationError("templates.txt must hold 10 blocks of 28 lines x 28 chars")
    return np.array([[c == "1" for c in r] for r in rows], dtype=np.float64).reshape(
        NUM_CLASSES, SIDE, SIDE)


_CENTER = np.array([(SIDE - 1) / 2, (SIDE - 1) / 2])
_GRID = np.mgrid[0:SIDE, 0:SIDE].astype(np.float64)


def _restroke(template, level):
    # blur then soft-threshold: a higher level gives a thinner stroke
    soft = ndimage.gaussian_filter(template, 1.0)
    return np.clip((soft - level) / 0.25 + 0.5, 0.0, 1.0)


def _affine(img, angle_deg, scale_yx, shear, shift_yx):
    theta = np.deg2rad(angle_deg)
    rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    # maps output coordinates back into the template
    m = rot @ np.array([[1.0, shear], [0.0, 1.0]]) @ np.diag(1.0 / np.asarray(scale_yx))
    offset = _CENTER - m @ (_CENTER + np.asarray(shift_yx))
    return ndimage.affine_transform(img, m, offset=offset, order=1, mode="constant", cval=0.0)


def _elastic(img, field, alpha, sigma):
    dy = ndimage.gaussian_filter(field[0], sigma) * alpha
    dx = ndimage.gaussian_filter(field[1], sigma) * alpha
    return ndimage.map_coordinates(img, [_GRID[0] + dy, _GRID[1] + dx], order=1,
                                   mode="constant", cval=0.0)


def generate_synthetic(spec: SynthSpec) -> LabeledImageSet:
    """Render jittered copies of the stroke templates, class-major order.

    Per image: stroke-thickness re-rendering, random affine map (rotation,
    per-axis scale, shear, shift), smooth elastic warp, additive Gaussian
    pixel noise, clamp to [0, 1].
    """
    spec.validate()
    templates = load_templates()
    n = NUM_CLASSES * spec.samples_per_class
    rng = SplitMix64(derive_seed(spec.seed, "synthetic"))
    levels = 0.5 + rng.uniform(n, -spec.stroke_jitter, spec.stroke_jitter)
    angles = rng.uniform(n, -spec.max_rotation, spec.max_rotation)
    scales = 1.0 + rng.uniform((n, 2), -spec.max_scale, spec.max_scale)
    shears = rng.uniform(n, -spec.max_shear, spec.max_shear)
    shifts = rng.uniform((n, 2), -spec.max_shift, spec.max_shift)
    warp = SplitMix64(derive_seed(spec.seed, "synthetic-elastic"))
    images = np.empty((n, SIDE, SIDE))
    labels = np.repeat(np.arange(NUM_CLASSES), spec.samples_per_class)
    affine = spec.max_rotation > 0 or spec.max_scale > 0 or spec.max_shear > 0 \
        or spec.max_shift > 0
    for i in range(n):
        img = templates[labels[i]]
        if spec.stroke_jitter > 0:
            img = _restroke(img, levels[i])
        if affine:
            img = _affine(img, angles[i], scales[i], shears[i], shifts[i])
        if spec.elastic_alpha > 0:
            img = _elastic(img, warp.normal((2, SIDE, SIDE)), spec.elastic_alpha,
                           spec.elastic_sigma)
        images[i] = img
    if spec.pixel_noise_sigma > 0:
        images += spec.pixel_noise_sigma * rng.normal(images.shape)
    np.clip(images, 0.0, 1.0, out=images)
    return LabeledImageSet(images, labels, NUM_CLASSES, "full")


# ---------------------------------------------------------------------------
# splitting

def _largest_remainder(total, ratios):
    exact = [r * total for r in ratios]
    counts = [int(np.floor(e)) for e in exact]
    left = total - sum(counts)
    # stable sort keeps earlier subsets first on equal remainders
    order = sorted(range(len(ratios)), key=lambda i: -(exact[i] - counts[i]))
    for i in order[:left]:
        counts[i] += 1
    return counts


def stratified_split(data: LabeledImageSet, ratios=(0.70, 0.15, 0.15), seed=0) -> DataSplit:
    """Per-class seeded Fisher-Yates shuffle, then cut by largest-remainder counts."""
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or min(ratios) <= 0 or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValidationError(f"ratios must be three positive reals summing to 1, got {ratios}")
    parts = {"train": [], "validation": [], "test": []}
    for c in range(data.num_classes):
        members = np.flatnonzero(data.labels == c)
        if len(members) < 3:
            raise InsufficientClassSamples(f"class {c} has {len(members)} samples, need >= 3")
        perm = SplitMix64(derive_seed(seed, "split", c)).permutation(len(members))
        members = members[perm]
        n_tr, n_va, _ = _largest_remainder(len(members), ratios)
        parts["train"].append(members[:n_tr])
        parts["validation"].append(members[n_tr:n_tr + n_va])
        parts["test"].append(members[n_tr + n_va:])
    idx = {k: np.concatenate(v) for k, v in parts.items()}
    return DataSplit(
        train=data.subset(idx["train"], "train"),
        validation=data.subset(idx["validation"], "validation"),
        test=data.subset(idx["test"], "test"),
        seed=seed,
        indices=idx,
    )


def vectorize(data: LabeledImageSet) -> np.ndarray:
    """Images as columns of a (H*W, n) matrix; column j is image j flattened row-major."""
    n = len(data)
    return np.ascontiguousarray(data.images.reshape(n, -1).T)
