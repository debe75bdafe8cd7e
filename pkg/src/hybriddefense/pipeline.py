"""Stage orchestration, artifact persistence, and the four-scenario report.

Stages run in order prepare -> train-cnn -> fit-nnmf -> train-classifier ->
train-denoiser -> attack -> evaluate -> report. Every artifact is an NTF v1
container in the output directory; ``manifest.json`` records the config
fingerprint and the SHA-256 of each artifact so later stages refuse to mix
outputs of different configurations.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import data as D
from .attacks import AdversarialBatch, AttackConfig, worst_case_attack
from .config import PipelineConfig
from .diffusion import (
    DenoiserConfig,
    NoiseSchedule,
    build_schedule,
    denoiser_from_params,
    purify_classify,
    train_denoiser,
)
from .errors import MissingArtifact, PipelineError, StageError, StaleArtifacts, ValidationError
from .features import ScalerStats, build_hybrid, concat_features, extract_cnn_features, fit_scaler
from .metrics import MetricRow, metric_row
from .nn.checkpoint import load_checkpoint, read_ntf, save_checkpoint, write_ntf
from .nn.model import cnn_layers, init_model, mlp_layers, predict_proba
from .nn.training import TrainConfig, train
from .nnmf import FactorPair, nnmf_fit, nnmf_project
from .rng import derive_seed

log = logging.getLogger(__name__)

ARTIFACTS = {
    "cnn": "cnn.ntf",
    "nnmf": "nnmf.ntf",
    "scaler": "scaler.ntf",
    "classifier": "classifier.ntf",
    "denoiser": "denoiser.ntf",
    "schedule": "schedule.ntf",
}
ADV_FILE = "adv.ntf"
REPORT_JSON = "report.json"
RESULTS_CSV = "results.csv"
MANIFEST = "manifest.json"

SCENARIOS = ("Clean_Base", "Clean_Def", "Robust_Base", "Robust_Def")
CSV_HEADER = "case,accuracy,precision,recall,f1,mcc,balanced_acc,roc_auc,log_loss,brier"
CSV_FIELDS = CSV_HEADER.split(",")[1:]


@dataclass
class ScenarioReport:
    rows: dict  # scenario name -> MetricRow
    fingerprint: str
    seed: int

    def to_dict(self):
        return {"fingerprint": self.fingerprint, "seed": self.seed,
                "rows": {k: self.rows[k].as_dict() for k in SCENARIOS}}


# ---------------------------------------------------------------------------
# manifest

def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _manifest_path(out):
    return Path(out) / MANIFEST


def _start_manifest(cfg, out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(_manifest_path(out), {"fingerprint": cfg.fingerprint(),
                                      "config": json.loads(cfg.canonical()),
                                      "artifacts": {}})


def _load_manifest(cfg, out):
    path = _manifest_path(out)
    if not path.exists():
        raise MissingArtifact(f"{path} not found; run the 'prepare' stage first")
    manifest = json.loads(path.read_text())
    if manifest.get("fingerprint") != cfg.fingerprint():
        raise StaleArtifacts(f"{path} was written for config {manifest.get('fingerprint')}, "
                             f"current config is {cfg.fingerprint()}")
    return manifest


def _record(cfg, out, *names):
    manifest = _load_manifest(cfg, out)
    for name in names:
        manifest["artifacts"][name] = _sha256(Path(out) / name)
    _write_json(_manifest_path(out), manifest)


def _require(cfg, out, name):
    """Path of an artifact after checking it is listed and unmodified."""
    manifest = _load_manifest(cfg, out)
    path = Path(out) / name
    if name not in manifest["artifacts"] or not path.exists():
        raise MissingArtifact(f"artifact {name} missing from {out}")
    if _sha256(path) != manifest["artifacts"][name]:
        raise StaleArtifacts(f"artifact {path} does not match its manifest hash")
    return path


# ---------------------------------------------------------------------------
# data and shared transforms

def load_dataset(cfg: PipelineConfig) -> D.LabeledImageSet:
    d = cfg.data
    if d.source == "idx":
        return D.load_idx(d.images_path, d.labels_path)
    s = d.synthetic
    return D.generate_synthetic(D.SynthSpec(
        s.samples_per_class, s.max_shift, s.max_rotation, s.pixel_noise_sigma,
        derive_seed(cfg.seed, "data"), s.max_scale, s.max_shear, s.stroke_jitter,
        s.elastic_alpha, s.elastic_sigma))


def prepare_split(cfg: PipelineConfig) -> D.DataSplit:
    return D.stratified_split(load_dataset(cfg), cfg.data.ratios, derive_seed(cfg.seed, "split"))


def nnmf_coefficients(W, images, cfg, tag):
    """(n, k) NNMF coefficients of ``images`` against the frozen basis."""
    V = D.vectorize(D.LabeledImageSet(images, np.zeros(len(images), dtype=np.int64)))
    return nnmf_project(W, V, cfg.nnmf.project_iters, derive_seed(cfg.seed, "project", tag)).T


def load_scaler(path) -> ScalerStats:
    meta, t = read_ntf(path)
    return ScalerStats(t["scaler.mean"], t["scaler.std"], meta["cnn_dim"], meta["nnmf_k"])


def load_schedule(path):
    meta, t = read_ntf(path)
    return NoiseSchedule(t["schedule.betas"], t["schedule.alpha_bars"]), meta


class DefendedPipeline:
    """NNMF projection + CNN features -> scaler -> purify -> hybrid classifier."""

    def __init__(self, cfg, cnn, W, scaler, classifier, denoiser, schedule):
        self.cfg, self.cnn, self.W = cfg, cnn, W
        self.scaler, self.classifier = scaler, classifier
        self.denoiser, self.schedule = denoiser, schedule

    def hybrid(self, images):
        coeffs = nnmf_coefficients(self.W, images, self.cfg, "eval")
        return build_hybrid(extract_cnn_features(self.cnn, images), coeffs, self.scaler).matrix

    def predict_proba(self, images):
        sc = self.cfg.schedule
        return purify_classify(self.hybrid(images), self.denoiser, self.classifier,
                               self.schedule, sc.t_inf, sc.m_passes,
                               derive_seed(self.cfg.seed, "purify"))


# ---------------------------------------------------------------------------
# stages

def stage_prepare(cfg, out):
    split = prepare_split(cfg)
    _start_manifest(cfg, out)
    log.info("split: %d train / %d validation / %d test",
             len(split.train), len(split.validation), len(split.test))
    return split


def stage_train_cnn(cfg, out, split=None):
    _load_manifest(cfg, out)
    split = split or prepare_split(cfg)
    c = cfg.cnn
    model = init_model(cnn_layers(split.train.num_classes, c.feature_dim), (1, D.SIDE, D.SIDE),
                       derive_seed(cfg.seed, "cnn-init"))
    tc = TrainConfig(c.epochs, c.batch_size, c.optimizer, c.learning_rate,
                     seed=derive_seed(cfg.seed, "cnn-train"))
    res = train(model, split.train.images, split.train.labels, tc,
                validation=(split.validation.images, split.validation.labels))
    save_checkpoint(res.model, Path(out) / ARTIFACTS["cnn"])
    _record(cfg, out, ARTIFACTS["cnn"])
    log.info("cnn: best validation accuracy %.4f (epoch %d)", res.best_val, res.best_epoch)
    return res.model


def stage_fit_nnmf(cfg, out, split=None):
    _load_manifest(cfg, out)
    split = split or prepare_split(cfg)
    n = cfg.nnmf
    fp = nnmf_fit(D.vectorize(split.train), n.k, n.iters, n.tol, derive_seed(cfg.seed, "nnmf"))
    write_ntf(Path(out) / ARTIFACTS["nnmf"], {"kind": "nnmf", "nnmf.k": fp.k},
              {"nnmf.W": fp.W, "nnmf.H": fp.H,
               "nnmf.objective_trace": np.asarray(fp.objective_trace)})
    _record(cfg, out, ARTIFACTS["nnmf"])
    log.info("nnmf: %d iterations, objective %.4f", len(fp.objective_trace) - 1,
             fp.objective_trace[-1])
    return fp


def _load_nnmf(path) -> FactorPair:
    _, t = read_ntf(path)
    return FactorPair(t["nnmf.W"], t["nnmf.H"], list(t["nnmf.objective_trace"]))


def _hybrid_sets(cfg, out, split):
    """Scaled hybrid features for train (fitted H) and validation (projected)."""
    cnn = load_checkpoint(_require(cfg, out, ARTIFACTS["cnn"]))
    fp = _load_nnmf(_require(cfg, out, ARTIFACTS["nnmf"]))
    train_raw = concat_features(extract_cnn_features(cnn, split.train.images), fp.H.T)
    val_coeffs = nnmf_coefficients(fp.W, split.validation.images, cfg, "validation")
    return cnn, fp, train_raw, extract_cnn_features(cnn, split.validation.images), val_coeffs


def stage_train_classifier(cfg, out, split=None):
    _load_manifest(cfg, out)
    split = split or prepare_split(cfg)
    _, fp, train_raw, val_cnn, val_coeffs = _hybrid_sets(cfg, out, split)
    scaler = fit_scaler(train_raw, cfg.cnn.feature_dim, fp.k)
    x_train = build_hybrid(train_raw[:, :cfg.cnn.feature_dim], fp.H.T, scaler).matrix
    x_val = build_hybrid(val_cnn, val_coeffs, scaler).matrix
    write_ntf(Path(out) / ARTIFACTS["scaler"],
              {"kind": "scaler", "cnn_dim": scaler.cnn_dim, "nnmf_k": scaler.nnmf_k,
               "layout": scaler.layout},
              {"scaler.mean": scaler.mean, "scaler.std": scaler.std})
    c = cfg.classifier
    dim = x_train.shape[1]
    model = init_model(mlp_layers([dim, c.hidden, split.train.num_classes]), (dim,),
                       derive_seed(cfg.seed, "classifier-init"))
    tc = TrainConfig(c.epochs, c.batch_size, c.optimizer, c.learning_rate,
                     seed=derive_seed(cfg.seed, "classifier-train"))
    res = train(model, x_train, split.train.labels, tc,
                validation=(x_val, split.validation.labels))
    save_checkpoint(res.model, Path(out) / ARTIFACTS["classifier"])
    _record(cfg, out, ARTIFACTS["scaler"], ARTIFACTS["classifier"])
    log.info("classifier: best validation accuracy %.4f (epoch %d)", res.best_val,
             res.best_epoch)
    return res.model


def stage_train_denoiser(cfg, out, split=None):
    _load_manifest(cfg, out)
    split = split or prepare_split(cfg)
    _, fp, train_raw, val_cnn, val_coeffs = _hybrid_sets(cfg, out, split)
    scaler = load_scaler(_require(cfg, out, ARTIFACTS["scaler"]))
    x_train = build_hybrid(train_raw[:, :cfg.cnn.feature_dim], fp.H.T, scaler).matrix
    x_val = build_hybrid(val_cnn, val_coeffs, scaler).matrix
    sc = cfg.schedule
    schedule = build_schedule(sc.T, sc.beta_start, sc.beta_end)
    dn = cfg.denoiser
    dc = DenoiserConfig(dn.epochs, dn.batch_size, dn.learning_rate, dn.hidden, dn.t_embed_dim,
                        derive_seed(cfg.seed, "denoiser"))
    res = train_denoiser(x_train, schedule, dc, validation=x_val)
    save_checkpoint(res.denoiser.params, Path(out) / ARTIFACTS["denoiser"])
    write_ntf(Path(out) / ARTIFACTS["schedule"],
              {"kind": "schedule", "T": sc.T, "beta_start": sc.beta_start,
               "beta_end": sc.beta_end, "t_inf": sc.t_inf, "m_passes": sc.m_passes},
              {"schedule.betas": schedule.betas, "schedule.alpha_bars": schedule.alpha_bars})
    _record(cfg, out, ARTIFACTS["denoiser"], ARTIFACTS["schedule"])
    if res.val_trace:
        log.info("denoiser: best validation mse %.5f (epoch %d)", min(res.val_trace),
                 res.best_epoch)
    return res.denoiser


def attack_config(cfg) -> AttackConfig:
    a = cfg.attack
    return AttackConfig(a.epsilon, a.n_iters, a.n_restarts, a.rho, a.alpha_momentum,
                        tuple(a.losses))


def stage_attack(cfg, out, split=None) -> AdversarialBatch:
    _load_manifest(cfg, out)
    split = split or prepare_split(cfg)
    cnn = load_checkpoint(_require(cfg, out, ARTIFACTS["cnn"]))
    batch = worst_case_attack(cnn, split.test.images, split.test.labels, attack_config(cfg),
                              derive_seed(cfg.seed, "attack"))
    codes = np.array([cfg.attack.losses.index(s) if s else -1 for s in batch.source_loss],
                     dtype=np.float64)
    write_ntf(Path(out) / ADV_FILE, {"kind": "adversarial", "losses": list(cfg.attack.losses)},
              {"adv.x": batch.x_adv, "adv.mask": batch.success_mask.astype(np.float64),
               "adv.source": codes})
    _record(cfg, out, ADV_FILE)
    log.info("attack: %d/%d test samples misclassified by the baseline",
             int(batch.success_mask.sum()), len(batch.success_mask))
    return batch


def load_adversarial(path) -> AdversarialBatch:
    meta, t = read_ntf(path)
    losses = meta["losses"]
    source = [losses[int(c)] if c >= 0 else "" for c in t["adv.source"]]
    return AdversarialBatch(t["adv.x"], t["adv.mask"].astype(bool), source)


def run_pipeline(cfg: PipelineConfig, out=None) -> dict:
    """Run the five training stages; returns {artifact name: path}."""
    out = Path(out or cfg.output_dir)
    split = _run_stage("prepare", stage_prepare, cfg, out)
    for name, fn in (("train-cnn", stage_train_cnn), ("fit-nnmf", stage_fit_nnmf),
                     ("train-classifier", stage_train_classifier),
                     ("train-denoiser", stage_train_denoiser)):
        _run_stage(name, fn, cfg, out, split)
    return {k: out / v for k, v in ARTIFACTS.items()}


def _run_stage(name, fn, *args):
    try:
        return fn(*args)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


# ---------------------------------------------------------------------------
# evaluation and reporting

def load_defended(cfg, out) -> DefendedPipeline:
    req = lambda key: _require(cfg, out, ARTIFACTS[key])
    schedule, _ = load_schedule(req("schedule"))
    return DefendedPipeline(
        cfg,
        load_checkpoint(req("cnn")),
        _load_nnmf(req("nnmf")).W,
        load_scaler(req("scaler")),
        load_checkpoint(req("classifier")),
        denoiser_from_params(load_checkpoint(req("denoiser"))),
        schedule,
    )


def evaluate_scenarios(cfg: PipelineConfig, out=None, split=None) -> ScenarioReport:
    """Baseline and defended models on clean and adversarial test images.

    Adversarial images come from the cached ``adv.ntf`` when present,
    otherwise the attack stage runs first.
    """
    out = Path(out or cfg.output_dir)
    split = split or prepare_split(cfg)
    defended = load_defended(cfg, out)
    manifest = _load_manifest(cfg, out)
    if ADV_FILE in manifest["artifacts"]:
        adv = load_adversarial(_require(cfg, out, ADV_FILE))
    else:
        adv = stage_attack(cfg, out, split)
    x, y = split.test.images, split.test.labels
    if adv.x_adv.shape != x.shape:
        raise StaleArtifacts("cached adversarial batch does not match the test set")
    rows = {
        "Clean_Base": metric_row(predict_proba(defended.cnn, x), y),
        "Clean_Def": metric_row(defended.predict_proba(x), y),
        "Robust_Base": metric_row(predict_proba(defended.cnn, adv.x_adv), y),
        "Robust_Def": metric_row(defended.predict_proba(adv.x_adv), y),
    }
    report = ScenarioReport(rows, cfg.fingerprint(), cfg.seed)
    _write_json(out / REPORT_JSON, report.to_dict())
    _record(cfg, out, REPORT_JSON)
    return report


def load_report(path) -> ScenarioReport:
    d = json.loads(Path(path).read_text())
    return ScenarioReport({k: MetricRow(**v) for k, v in d["rows"].items()},
                          d["fingerprint"], d["seed"])


def format_results(report: ScenarioReport) -> str:
    if set(report.rows) != set(SCENARIOS):
        raise ValidationError(f"report rows {sorted(report.rows)} != {list(SCENARIOS)}")
    lines = [CSV_HEADER]
    for case in SCENARIOS:
        row = report.rows[case].as_dict()
        lines.append(",".join([case] + [f"{row[f]:.4f}" for f in CSV_FIELDS]))
    return "\n".join(lines) + "\n"


def write_results(report: ScenarioReport, path):
    Path(path).write_text(format_results(report))


def read_results(path) -> ScenarioReport:
    """Parse a results CSV back into a report (values at 4-decimal precision)."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValidationError(f"{path}: unexpected header")
    rows = {}
    for line in lines[1:]:
        case, *vals = line.split(",")
        rows[case] = MetricRow(**{f: float(v) for f, v in zip(CSV_FIELDS, vals)})
    return ScenarioReport(rows, "", 0)


STAGES = {
    "prepare": stage_prepare,
    "train-cnn": stage_train_cnn,
    "fit-nnmf": stage_fit_nnmf,
    "train-classifier": stage_train_classifier,
    "train-denoiser": stage_train_denoiser,
    "attack": stage_attack,
    "evaluate": evaluate_scenarios,
}


def run_stage(name, cfg, out):
    """Run one named stage (or 'report' / 'all') with stage-annotated errors."""
    out = Path(out)
    if name == "report":
        return _run_stage("report", lambda: write_results(
            load_report(_require(cfg, out, REPORT_JSON)), out / RESULTS_CSV))
    if name == "all":
        split = _run_stage("prepare", stage_prepare, cfg, out)
        for stage in ("train-cnn", "fit-nnmf", "train-classifier", "train-denoiser", "attack"):
            _run_stage(stage, STAGES[stage], cfg, out, split)
        report = _run_stage("evaluate", evaluate_scenarios, cfg, out, split)
        _run_stage("report", write_results, report, out / RESULTS_CSV)
        return report
    return _run_stage(name, STAGES[name], cfg, out)


__all__ = [
    "ARTIFACTS", "DefendedPipeline", "PipelineError", "SCENARIOS", "ScenarioReport",
    "evaluate_scenarios", "format_results", "load_report", "read_results", "run_pipeline",
    "run_stage", "write_results",
]
