"""Pipeline configuration: JSON parsing with defaults, validation, fingerprinting."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import InvalidValue, ParseError, UnknownKey


@dataclass
class SyntheticSection:
    samples_per_class: int = 1000
    max_shift: float = 2.5
    max_rotation: float = 15.0
    pixel_noise_sigma: float = 0.0
    max_scale: float = 0.12
    max_shear: float = 0.25
    stroke_jitter: float = 0.10
    elastic_alpha: float = 22.0
    elastic_sigma: float = 4.0


@dataclass
class DataSection:
    source: str = "synthetic"  # "synthetic" | "idx"
    images_path: Optional[str] = None
    labels_path: Optional[str] = None
    synthetic: SyntheticSection = field(default_factory=SyntheticSection)
    ratios: list = field(default_factory=lambda: [0.70, 0.15, 0.15])


@dataclass
class CnnSection:
    epochs: int = 10
    batch_size: int = 64
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    feature_dim: int = 128


@dataclass
class NnmfSection:
    k: int = 30
    iters: int = 500
    tol: float = 1e-6
    project_iters: int = 200


@dataclass
class ClassifierSection:
    epochs: int = 10
    batch_size: int = 64
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    hidden: int = 128


@dataclass
class DenoiserSection:
    epochs: int = 100
    batch_size: int = 64
    learning_rate: float = 1e-3
    hidden: int = 256
    t_embed_dim: int = 16


@dataclass
class ScheduleSection:
    T: int = 50
    beta_start: float = 1e-4
    beta_end: float = 0.02
    t_inf: int = 10
    m_passes: int = 10


@dataclass
class AttackSection:
    epsilon: float = 0.1
    n_iters: int = 100
    n_restarts: int = 1
    rho: float = 0.75
    alpha_momentum: float = 0.75
    losses: list = field(default_factory=lambda: ["ce", "dlr"])


@dataclass
class PipelineConfig:
    seed: int = 0
    output_dir: str = "runs/default"
    data: DataSection = field(default_factory=DataSection)
    cnn: CnnSection = field(default_factory=CnnSection)
    nnmf: NnmfSection = field(default_factory=NnmfSection)
    classifier: ClassifierSection = field(default_factory=ClassifierSection)
    denoiser: DenoiserSection = field(default_factory=DenoiserSection)
    schedule: ScheduleSection = field(default_factory=ScheduleSection)
    attack: AttackSection = field(default_factory=AttackSection)

    def to_dict(self):
        return dataclasses.asdict(self)

    def canonical(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def fingerprint(self) -> str:
        """SHA-256 of the canonical config; ``output_dir`` does not take part."""
        d = self.to_dict()
        d.pop("output_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
                              ).hexdigest()


def _build(cls, raw, prefix):
    if not isinstance(raw, dict):
        raise InvalidValue(prefix or "<root>", "expected an object")
    known = {f.name: f for f in dataclasses.fields(cls)}
    for key in raw:
        if key not in known:
            raise UnknownKey(f"unknown key '{prefix}{key}'")
    obj = cls()
    for name, f in known.items():
        if name not in raw:
            continue
        value = raw[name]
        key = f"{prefix}{name}"
        default = getattr(obj, name)
        if dataclasses.is_dataclass(default):
            value = _build(type(default), value, key + ".")
        else:
            value = _coerce(key, value, default, f)
        setattr(obj, name, value)
    return obj


def _coerce(key, value, default, f):
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif isinstance(default, list):
        ok = isinstance(value, list)
    elif isinstance(default, str):
        ok = isinstance(value, str)
    else:  # Optional[str]
        ok = value is None or isinstance(value, str)
    if not ok:
        raise InvalidValue(key, f"bad type {type(value).__name__}")
    return value


def _check(cond, key, msg):
    if not cond:
        raise InvalidValue(key, msg)


def validate(cfg: PipelineConfig) -> PipelineConfig:
    d = cfg.data
    _check(d.source in ("synthetic", "idx"), "data.source", "must be 'synthetic' or 'idx'")
    if d.source == "idx":
        _check(bool(d.images_path), "data.images_path", "required for idx source")
        _check(bool(d.labels_path), "data.labels_path", "required for idx source")
    _check(len(d.ratios) == 3 and all(isinstance(r, (int, float)) and r > 0 for r in d.ratios)
           and abs(sum(d.ratios) - 1) <= 1e-9, "data.ratios", "three positive reals summing to 1")
    s = d.synthetic
    _check(s.samples_per_class >= 1, "data.synthetic.samples_per_class", "must be >= 1")
    _check(s.pixel_noise_sigma >= 0, "data.synthetic.pixel_noise_sigma", "must be >= 0")
    _check(s.max_shift >= 0, "data.synthetic.max_shift", "must be >= 0")
    _check(s.max_rotation >= 0, "data.synthetic.max_rotation", "must be >= 0")
    _check(0 <= s.max_scale < 1, "data.synthetic.max_scale", "must be in [0, 1)")
    _check(s.max_shear >= 0, "data.synthetic.max_shear", "must be >= 0")
    _check(0 <= s.stroke_jitter < 0.5, "data.synthetic.stroke_jitter", "must be in [0, 0.5)")
    _check(s.elastic_alpha >= 0, "data.synthetic.elastic_alpha", "must be >= 0")
    _check(s.elastic_sigma > 0, "data.synthetic.elastic_sigma", "must be > 0")
    _check(cfg.seed >= 0, "seed", "must be >= 0")
    for name in ("cnn", "classifier"):
        sec = getattr(cfg, name)
        _check(sec.epochs >= 0, f"{name}.epochs", "must be >= 0")
        _check(sec.batch_size >= 1, f"{name}.batch_size", "must be >= 1")
        _check(sec.optimizer in ("adam", "sgd_momentum"), f"{name}.optimizer",
               "must be 'adam' or 'sgd_momentum'")
        _check(sec.learning_rate > 0, f"{name}.learning_rate", "must be > 0")
    _check(cfg.cnn.feature_dim >= 1, "cnn.feature_dim", "must be >= 1")
    _check(cfg.classifier.hidden >= 1, "classifier.hidden", "must be >= 1")
    _check(cfg.nnmf.k >= 1, "nnmf.k", "must be >= 1")
    _check(cfg.nnmf.iters >= 1, "nnmf.iters", "must be >= 1")
    _check(cfg.nnmf.tol >= 0, "nnmf.tol", "must be >= 0")
    _check(cfg.nnmf.project_iters >= 1, "nnmf.project_iters", "must be >= 1")
    dn = cfg.denoiser
    _check(dn.epochs >= 0, "denoiser.epochs", "must be >= 0")
    _check(dn.batch_size >= 1, "denoiser.batch_size", "must be >= 1")
    _check(dn.learning_rate > 0, "denoiser.learning_rate", "must be > 0")
    _check(dn.hidden >= 1, "denoiser.hidden", "must be >= 1")
    _check(dn.t_embed_dim >= 2 and dn.t_embed_dim % 2 == 0, "denoiser.t_embed_dim",
           "must be an even integer >= 2")
    sc = cfg.schedule
    _check(sc.T >= 1, "schedule.T", "must be >= 1")
    _check(0 < sc.beta_start <= sc.beta_end < 1, "schedule.beta_start",
           "need 0 < beta_start <= beta_end < 1")
    _check(1 <= sc.t_inf <= sc.T, "schedule.t_inf", "must be in [1, T]")
    _check(sc.m_passes >= 1, "schedule.m_passes", "must be >= 1")
    a = cfg.attack
    _check(0 <= a.epsilon <= 1, "attack.epsilon", "must be in [0, 1]")
    _check(a.n_iters >= 2, "attack.n_iters", "must be >= 2")
    _check(a.n_restarts >= 1, "attack.n_restarts", "must be >= 1")
    _check(0 < a.rho < 1, "attack.rho", "must be in (0, 1)")
    _check(0 < a.alpha_momentum <= 1, "attack.alpha_momentum", "must be in (0, 1]")
    _check(len(a.losses) >= 1 and all(l in ("ce", "dlr") for l in a.losses)
           and len(set(a.losses)) == len(a.losses), "attack.losses",
           "non-empty list drawn from 'ce', 'dlr'")
    return cfg


def config_from_dict(raw: dict) -> PipelineConfig:
    return validate(_build(PipelineConfig, raw, ""))


def parse_config_text(text: str) -> PipelineConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    return config_from_dict(raw)


def parse_config(path) -> PipelineConfig:
    try:
        text = Path(path).read_bytes().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not valid UTF-8 ({exc.reason})") from None
    return parse_config_text(text)


def serialize_config(cfg: PipelineConfig) -> str:
    return json.dumps(cfg.to_dict(), sort_keys=True, indent=2) + "\n"
