import csv
import io
import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dppest.harness.checks import j1_decimal, run_checks
from dppest.harness.cli import main, parse_model
from dppest.harness.config import CELL_STRIDE, JOBS_ENV, ConfigError, StudyConfig, default_jobs
from dppest.harness.study import REPORT_COLUMNS, rmse_stats, run_study, summarise
from dppest.io import write_pattern
from dppest.kernels import PointPattern
from dppest.numerics import Window

ROOT = Path(__file__).resolve().parents[1]
SMOKE = ROOT / "configs" / "smoke.json"


def smoke(**kw) -> StudyConfig:
    d = json.loads(SMOKE.read_text())
    d.update(kw)
    return StudyConfig.from_dict(d)


# ---------------------------------------------------------------- config


def test_shipped_configs_load():
    for path in sorted((ROOT / "configs").glob("*.json")):
        cfg = StudyConfig.load(path)
        assert StudyConfig.from_dict(json.loads(cfg.dumps())) == cfg


@pytest.mark.parametrize("patch", [
    {"replicates": 0},
    {"schema_version": 99},
    {"family": "cauchy"},
    {"cells": []},
    {"cells": [{"intensity": {"type": "homogeneous", "rho": 1000}, "alpha": 0.018}]},
    {"methods": ["truncated:R=-1"]},
    {"extras": ["nonsense"]},
    {"unexpected_key": 1},
])
def test_config_validation(patch):
    with pytest.raises(ConfigError):
        smoke(**patch)


def test_seed_streams_distinct():
    cfg = smoke()
    assert cfg.seed(1, 0).replicate == CELL_STRIDE
    seeds = {(cfg.seed(c, r).master, cfg.seed(c, r).replicate) for c in range(3) for r in range(50)}
    assert len(seeds) == 150


def test_default_jobs(monkeypatch):
    monkeypatch.delenv(JOBS_ENV, raising=False)
    assert default_jobs() == 1
    monkeypatch.setenv(JOBS_ENV, "3")
    assert default_jobs() == 3
    monkeypatch.setenv(JOBS_ENV, "many")
    with pytest.raises(ConfigError):
        default_jobs()


# ---------------------------------------------------------------- statistics


def test_rmse_stats_examples():
    rmse, se, bias = rmse_stats([3.0, -4.0])
    assert rmse == pytest.approx(math.sqrt(12.5))
    assert bias == -0.5
    assert all(math.isnan(v) for v in rmse_stats([]))
    assert math.isnan(rmse_stats([1.0])[1])


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=60))
def test_rmse_at_least_abs_bias(errors):
    rmse, _, bias = rmse_stats(errors)
    assert rmse >= abs(bias) * (1 - 1e-12)


def test_rmse_se_matches_bootstrap():
    e = np.random.default_rng(0).normal(0.001, 0.005, 400)
    _, se, _ = rmse_stats(e)
    rng = np.random.default_rng(1)
    boot = [math.sqrt(np.mean(rng.choice(e, e.size) ** 2)) for _ in range(2000)]
    assert se == pytest.approx(np.std(boot), rel=0.15)


def _fake_records(statuses):
    recs = []
    for r, (s1, s2) in enumerate(statuses):
        recs.append({"cell": 0, "replicate": r, "status": "ok", "n": 100, "fits": {
            "truncated:R=0.1": {"theta": [100, 0.05 + 0.001 * r], "status": s1, "elapsed": 1.0, "range": 0.1},
            "adaptive:eps=0.01": {"theta": [100, 0.05 - 0.001 * r], "status": s2, "elapsed": 0.5, "range": 0.14},
        }})
    return recs


def test_co_convergence_filter():
    cfg = smoke()
    recs = _fake_records([("Converged", "Converged"), ("Converged", "NoBracket"), ("Converged", "Converged")])
    rep = summarise(cfg, recs)
    row = rep.row("rho=100,alpha=0.05", "truncated:R=0.1")
    assert row["n_used"] == 2 and row["conv_frac"] == 1.0
    assert rep.row("rho=100,alpha=0.05", "adaptive:eps=0.01")["conv_frac"] == pytest.approx(2 / 3)
    assert row["rmse"] == pytest.approx(1e3 * math.sqrt((0 + 0.002**2) / 2))
    assert row["mean_time"] == 1.0


def test_report_columns_and_shape():
    rep = summarise(smoke(), _fake_records([("Converged", "Converged")] * 3))
    rows = list(csv.reader(io.StringIO(rep.to_csv())))
    assert tuple(rows[0]) == REPORT_COLUMNS
    assert len(rows) == 3
    assert "rmse" in rep.to_text()


# ---------------------------------------------------------------- study runs


def _strip_time(text):
    rows = list(csv.DictReader(io.StringIO(text)))
    for r in rows:
        r.pop("mean_time")
    return rows


@pytest.mark.slow
def test_study_reproducible_across_jobs(tmp_path):
    cfg = smoke(replicates=3)
    a = run_study(cfg, jobs=1)
    b = run_study(cfg, jobs=2)
    assert _strip_time(a.to_csv()) == _strip_time(b.to_csv())
    thetas = lambda rep: [(r["cell"], r["replicate"], f["theta"]) for r in rep.records for f in r["fits"].values()]
    assert thetas(a) == thetas(b)
    a.write(tmp_path, "smoke")
    assert {p.name for p in tmp_path.iterdir()} == {"smoke.csv", "smoke.txt", "smoke_replicates.jsonl"}


# ---------------------------------------------------------------- CLI


def test_parse_model():
    assert parse_model("bessel") == ("bessel", "homogeneous", ("1", "x"))
    assert parse_model("gaussian:loglinear(1, x, y)") == ("gaussian", "loglinear", ("1", "x", "y"))
    import click

    with pytest.raises(click.BadParameter):
        parse_model("cauchy")


def test_cli_simulate_and_fit(tmp_path, capsys):
    cfg = smoke(replicates=1)
    cpath = tmp_path / "c.json"
    cpath.write_text(cfg.dumps())
    assert main(["simulate", "--config", str(cpath), "--out", str(tmp_path / "pats")]) == 0
    first = (tmp_path / "pats" / "cell00_rep0000.csv").read_bytes()
    assert main(["simulate", "--config", str(cpath), "--out", str(tmp_path / "pats2")]) == 0
    assert (tmp_path / "pats2" / "cell00_rep0000.csv").read_bytes() == first
    out = tmp_path / "fit.json"
    code = main(["fit", "--pattern", str(tmp_path / "pats" / "cell00_rep0000.csv"), "--out", str(out)])
    assert code == 0
    assert json.loads(out.read_text())["status"] == "Converged"
    assert "Converged" in capsys.readouterr().out


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["fit", "--pattern", str(tmp_path / "missing.csv")]) == 1
    empty = write_pattern(PointPattern(np.zeros((0, 2)), Window.unit()), tmp_path / "empty.csv")
    assert main(["fit", "--pattern", str(empty)]) == 2
    err = capsys.readouterr().err.strip().splitlines()[-1]
    assert json.loads(err)["exit_code"] == 2
    assert main(["fit", "--pattern", str(empty), "--model", "cauchy"]) == 1
    assert main(["fit", "--pattern", str(empty), "--method", "bogus"]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({**json.loads(SMOKE.read_text()),
                               "cells": [{"intensity": {"type": "homogeneous", "rho": 1000}, "alpha": 0.018}]}))
    assert main(["study", "--config", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert main(["study", "--config", str(SMOKE), "--out", str(tmp_path / "o"), "--jobs", "0"]) == 1
    assert main(["--help"]) == 0


def test_cli_check_subset(capsys):
    assert main(["check", "--only", "bessel", "--only", "existence", "--only", "range"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 3 and all(l.startswith("PASS") for l in lines)


def test_j1_decimal_series():
    import mpmath

    for x in (-30.0, 0.0, 1e-3, 2.0, 17.5, 50.0):
        assert j1_decimal(x) == pytest.approx(float(mpmath.besselj(1, x)), abs=1e-15)


def test_shipped_configs_match_schema():
    jsonschema = pytest.importorskip("jsonschema")
    schema = json.loads((ROOT / "docs" / "study_config.schema.json").read_text())
    for path in sorted((ROOT / "configs").glob("*.json")):
        jsonschema.validate(json.loads(path.read_text()), schema)
    cfg = json.loads(SMOKE.read_text())
    # the dataclass defaults serialise to a schema-valid document as well
    jsonschema.validate(json.loads(StudyConfig.from_dict(cfg).dumps()), schema)
