import dataclasses
import json

import numpy as np
import pytest

from hybriddefense import cli
from hybriddefense.config import (
    PipelineConfig,
    config_from_dict,
    parse_config,
    parse_config_text,
    serialize_config,
)
from hybriddefense.errors import (
    InvalidValue,
    MissingArtifact,
    ParseError,
    StageError,
    StaleArtifacts,
    UnknownKey,
)
from hybriddefense.metrics import MetricRow
from hybriddefense.nn.checkpoint import read_ntf
from hybriddefense.pipeline import (
    ARTIFACTS,
    CSV_HEADER,
    RESULTS_CSV,
    SCENARIOS,
    ScenarioReport,
    evaluate_scenarios,
    format_results,
    load_adversarial,
    prepare_split,
    read_results,
    run_pipeline,
    run_stage,
    write_results,
)

from conftest import SMALL


# ---------------------------------------------------------------------------
# configuration

def test_empty_object_gives_defaults():
    cfg = parse_config_text("{}")
    assert cfg == PipelineConfig()
    assert cfg.nnmf.k == 30
    assert cfg.data.ratios == [0.70, 0.15, 0.15]
    assert cfg.attack.epsilon == 0.1
    assert (cfg.schedule.T, cfg.schedule.t_inf, cfg.schedule.m_passes) == (50, 10, 10)
    assert (cfg.cnn.epochs, cfg.cnn.batch_size, cfg.cnn.feature_dim) == (10, 64, 128)


def test_invalid_value_names_key():
    with pytest.raises(InvalidValue) as exc:
        parse_config_text('{"nnmf": {"k": 0}}')
    assert exc.value.key == "nnmf.k"
    with pytest.raises(InvalidValue) as exc:
        parse_config_text('{"attack": {"epsilon": "big"}}')
    assert exc.value.key == "attack.epsilon"


def test_unknown_key():
    with pytest.raises(UnknownKey, match="cnn.epoch"):
        parse_config_text('{"cnn": {"epoch": 3}}')


def test_parse_error_position():
    with pytest.raises(ParseError) as exc:
        parse_config_text('{\n  "seed": 1,\n  "cnn": {"epochs": }\n}')
    assert (exc.value.line, exc.value.column) == (3, 21)


def test_non_utf8_file(tmp_path):
    p = tmp_path / "c.json"
    p.write_bytes(b'{"output_dir": "\xff"}')
    with pytest.raises(ParseError):
        parse_config(p)


def test_serialize_parse_idempotent(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(SMALL))
    cfg = parse_config(p)
    text = serialize_config(cfg)
    again = parse_config_text(text)
    assert again == cfg
    assert serialize_config(again) == text


def test_fingerprint_ignores_output_dir_only():
    a = PipelineConfig()
    b = dataclasses.replace(a, output_dir="elsewhere")
    c = config_from_dict({"seed": 1})
    assert a.fingerprint() == b.fingerprint()
    assert a.fingerprint() != c.fingerprint()
    assert len(a.fingerprint()) == 64


# ---------------------------------------------------------------------------
# results CSV

def report_with(value):
    row = MetricRow(*([value] * 9))
    return ScenarioReport({k: row for k in SCENARIOS}, "fp", 0)


def test_csv_formatting():
    text = format_results(report_with(1.0))
    lines = text.splitlines()
    assert lines[0] == CSV_HEADER
    assert lines[1] == "Clean_Base," + ",".join(["1.0000"] * 9)
    assert [l.split(",")[0] for l in lines[1:]] == list(SCENARIOS)
    assert all(len(l.split(",")) == 10 for l in lines)


def test_csv_round_trip_bytes(tmp_path):
    rows = {k: MetricRow(*np.random.default_rng(i).random(9)) for i, k in enumerate(SCENARIOS)}
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_results(ScenarioReport(rows, "fp", 0), p1)
    write_results(read_results(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


# ---------------------------------------------------------------------------
# pipeline on the small configuration

def test_small_run_emits_artifacts(small_run):
    out, report = small_run
    for name in ARTIFACTS.values():
        assert (out / name).is_file()
        assert (out / name).read_bytes()[:6] == b"FDNZ1\x00"
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(ARTIFACTS.values()) <= set(manifest["artifacts"])
    assert set(report.rows) == set(SCENARIOS)
    assert (out / RESULTS_CSV).read_text() == format_results(report)


def test_small_run_report_properties(small_run, small_cfg):
    out, report = small_run
    r = report.rows
    assert r["Robust_Base"].accuracy <= r["Clean_Base"].accuracy
    assert report.fingerprint == small_cfg.fingerprint()
    adv = load_adversarial(out / "adv.ntf")
    x = prepare_split(small_cfg).test.images
    assert adv.x_adv.shape == x.shape
    assert np.abs(adv.x_adv - x).max() <= small_cfg.attack.epsilon + 1e-10
    meta, tensors = read_ntf(out / ARTIFACTS["nnmf"])
    assert meta["nnmf.k"] == small_cfg.nnmf.k
    assert np.diff(tensors["nnmf.objective_trace"]).max() <= 1e-10


def test_rerun_is_byte_identical(small_run, small_cfg, tmp_path):
    out, _ = small_run
    run_stage("all", small_cfg, tmp_path)
    for name in list(ARTIFACTS.values()) + ["adv.ntf", RESULTS_CSV, "report.json"]:
        assert (out / name).read_bytes() == (tmp_path / name).read_bytes(), name


def test_stale_manifest_detected(small_run, small_cfg):
    out, _ = small_run
    other = dataclasses.replace(small_cfg, seed=small_cfg.seed + 1)
    with pytest.raises(StaleArtifacts):
        evaluate_scenarios(other, out)
    with pytest.raises(StageError) as exc:
        run_stage("train-classifier", other, out)
    assert exc.value.stage == "train-classifier"
    assert isinstance(exc.value.cause, StaleArtifacts)


def test_tampered_artifact_detected(small_cfg, tmp_path):
    cfg = config_from_dict({**SMALL, "data": {"synthetic": {"samples_per_class": 20}},
                            "nnmf": {"k": 3, "iters": 5, "project_iters": 5}})
    run_pipeline(cfg, tmp_path)
    p = tmp_path / ARTIFACTS["cnn"]
    buf = bytearray(p.read_bytes())
    buf[-1] ^= 1
    p.write_bytes(bytes(buf))
    with pytest.raises(StaleArtifacts):
        evaluate_scenarios(cfg, tmp_path)


def test_missing_artifacts(small_cfg, tmp_path):
    with pytest.raises(MissingArtifact):
        evaluate_scenarios(small_cfg, tmp_path)


def test_zero_budget_robust_rows_equal_clean_rows(tmp_path):
    raw = {**SMALL, "data": {"synthetic": {"samples_per_class": 30}},
           "attack": {"epsilon": 0.0, "n_iters": 4}}
    report = run_stage("all", config_from_dict(raw), tmp_path)
    assert report.rows["Robust_Base"] == report.rows["Clean_Base"]
    assert report.rows["Robust_Def"] == report.rows["Clean_Def"]


# ---------------------------------------------------------------------------
# command line

def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"nnmf": {"k": 0}}')
    assert cli.main(["prepare", "--config", str(bad), "--out", str(tmp_path / "o"), "-q"]) == 1
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    assert cli.main(["prepare", "--config", str(broken), "-q"]) == 1
    # evaluating an empty directory is a runtime failure, not a config problem
    good = tmp_path / "good.json"
    good.write_text(json.dumps({**SMALL, "data": {"synthetic": {"samples_per_class": 5}}}))
    assert cli.main(["evaluate", "--config", str(good), "--out", str(tmp_path / "e"), "-q"]) == 2
    assert cli.main(["prepare", "--config", str(good), "--out", str(tmp_path / "p"),
                     "--seed", "4", "-q"]) == 0
    manifest = json.loads((tmp_path / "p" / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 4
    assert "config error" in capsys.readouterr().err


def test_cli_all_prints_csv(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({**SMALL, "data": {"synthetic": {"samples_per_class": 10}},
                               "nnmf": {"k": 3, "iters": 5, "project_iters": 5},
                               "attack": {"n_iters": 3}}))
    assert cli.main(["all", "--config", str(cfg), "--out", str(tmp_path / "o"), "-q"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == CSV_HEADER
    assert out == (tmp_path / "o" / RESULTS_CSV).read_text()
    assert cli.main(["report", "--config", str(cfg), "--out", str(tmp_path / "o"), "-q"]) == 0
