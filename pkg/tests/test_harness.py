import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from extrinsic_spectra import harness
from extrinsic_spectra.cli import main
from extrinsic_spectra.geom import make_circle, write_csv_polyline
from extrinsic_spectra.harness import (
    INEQUALITY_IDS,
    RATIO_ONLY,
    ConfigError,
    ExperimentConfig,
    asserted,
    cheng_yang_bound,
    ratio_only,
    universal_inequality_residual,
    universal_terms,
)
from extrinsic_spectra.spectrum import closed_form_spectrum

SMALL = {"seed": 0, "k_max": 4, "n_grassmann": 8, "crofton_samples": 4000, "radii_count": 6,
         "local_centers": 16, "growth_centers": 64}


@pytest.fixture(scope="module")
def circle_reports():
    return harness.run_experiment(ExperimentConfig.from_dict({"kind": "euclidean", "shape": "circle(64)", **SMALL}))


@pytest.fixture(scope="module")
def curve_reports():
    cfg = ExperimentConfig.from_dict({"kind": "cpn", "curve": "identity", "curve_subdiv": 3, **SMALL})
    return harness.run_experiment(cfg)


def test_verdicts():
    assert asserted("reilly", "x", 2, 1.0, 2.0, 0.0).verdict == "holds"
    assert asserted("reilly", "x", 2, 2.01, 2.0, 0.02).verdict == "holds"
    assert asserted("reilly", "x", 2, 2.1, 2.0, 0.02).verdict == "violated"
    assert asserted("degree-volume", "x", None, 0.9, 1.0, 0.02, equality=True).verdict == "violated"
    r = ratio_only("cde-ratio", "x", 3, 1.5)
    assert r.verdict == "ratio-only" and r.rhs == "ratio-only"


def test_euclidean_report_ids(circle_reports):
    ids = {r.inequality_id for r in circle_reports}
    assert ids == {"cde-ratio", "reilly", "ehi-ratio", "vol-lemma", "ball-growth", "cor-2.6",
                   "thm-a3-mean", "thm-a3-local"}
    assert ids <= set(INEQUALITY_IDS)
    for r in circle_reports:
        assert (r.verdict == "ratio-only") == (r.inequality_id in RATIO_ONLY)
        assert r.verdict != "violated", r


def test_curve_report_ids(curve_reports):
    ids = {r.inequality_id for r in curve_reports}
    assert ids == {"degree-volume", "thm-1.2", "normalized-cpn", "cheng-yang", "universal"}
    assert all(r.verdict != "violated" for r in curve_reports)


def test_render_formats(circle_reports):
    lines = harness.render(circle_reports, "jsonl").splitlines()
    assert len(lines) == len(circle_reports)
    assert all(json.loads(line)["fixture"] == "circle(64)" for line in lines)
    rows = list(csv.DictReader(io.StringIO(harness.render(circle_reports, "csv"))))
    assert tuple(rows[0]) == harness.CSV_COLUMNS
    with pytest.raises(ConfigError):
        harness.render(circle_reports, "xml")


def test_jsonable_infinities():
    assert harness._jsonable({"a": math.inf, "b": np.float64(1.5), "c": [np.int64(2)]}) == \
        {"a": "inf", "b": 1.5, "c": [2]}


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError, match="seed"):
        ExperimentConfig.from_dict({"kind": "cpn", "curve": "identity"})
    with pytest.raises(ConfigError, match="unknown"):
        ExperimentConfig.from_dict({"kind": "cpn", "curve": "identity", "seed": 0, "colour": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig(kind="euclidean", seed=0)
    with pytest.raises(ConfigError):
        ExperimentConfig(kind="cpn", seed=0, curve="identity", proj_resolution=32)
    with pytest.raises(ConfigError):
        ExperimentConfig(kind="euclidean", seed=0, shape="circle(8)", eps=1.0)
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        harness.load_config(bad)


def test_load_suite_with_defaults(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps({"defaults": {"seed": 3, "k_max": 5},
                             "experiments": [{"kind": "cpn", "curve": "identity"},
                                             {"kind": "euclidean", "shape": "sphere(1)", "k_max": 7}]}))
    suite = harness.load_config(p)
    assert [e.k_max for e in suite.experiments] == [5, 7]
    assert all(e.seed == 3 for e in suite.experiments)


def test_cheng_yang_validation():
    for bad in ([1.0], [0.0, 1.0], [2.0, 1.0]):
        with pytest.raises(ValueError):
            cheng_yang_bound(bad, 2)


def test_universal_equality_on_closed_form():
    lam = closed_form_spectrum("cpm(1)", 30)
    for k in (1, 4, 9):  # k = (j+1)^2 - 1 completes an eigenspace
        lhs, rhs = universal_terms(lam, 1, k)
        assert lhs == pytest.approx(rhs, rel=1e-12)
    with pytest.raises(ValueError):
        universal_terms(lam[::-1], 1, 3)


@given(st.integers(1, 40))
def test_closed_form_cp1_satisfies_universal_inequality(k):
    lam = closed_form_spectrum("cpm(1)", 50)
    assert universal_inequality_residual(lam, 1, k) >= -1e-9


@given(st.lists(st.floats(0.1, 100), min_size=2, max_size=12))
def test_cheng_yang_implication(values):
    mu = np.sort(np.asarray(values))
    rows = cheng_yang_bound(mu, 2)
    for j, row in enumerate(rows):
        if all(r["hypothesis_holds"] for r in rows[: j + 1]):
            assert row["mu_next"] <= row["bound"] * (1 + 1e-9)


# --- command line -----------------------------------------------------------------


def test_cli_spectrum(capsys):
    assert main(["spectrum", "--shape", "circle(64)", "--k", "3"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["eigenvalues"][0] == pytest.approx(0, abs=1e-9)


def test_cli_index_and_crofton(capsys):
    assert main(["index", "--shape", "circle(64)", "--kind", "sup", "--samples", "4"]) == 0
    assert json.loads(capsys.readouterr().out)["value"] == 2
    assert main(["crofton", "--m", "1", "--p", "1", "--samples", "2000"]) == 0
    assert json.loads(capsys.readouterr().out)["dims"] == [1, 1]


def test_cli_capacitor_file_input(tmp_path, capsys):
    path = tmp_path / "c.csv"
    write_csv_polyline(make_circle(128), path)
    assert main(["capacitor", "--shape", str(path), "--n", "2", "--r", "0.18", "--dump"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["bound"] >= out["lambda_n"] and len(out["family"]["cores"]) == 2


def test_cli_verify_and_report(tmp_path, capsys):
    assert main(["verify-cpn", "--curve", "identity", "--k", "3", "--format", "csv"]) == 0
    assert capsys.readouterr().out.startswith("fixture,")
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"kind": "euclidean", "shape": "circle(48)", **SMALL}))
    out = tmp_path / "r.jsonl"
    assert main(["report", str(cfg), "--out", str(out)]) == 0
    assert out.read_text().count("\n") > 10


def test_cli_errors(capsys):
    assert main(["spectrum", "--shape", "cube(3)"]) == 2
    assert "error:" in capsys.readouterr().err
    assert main(["verify-euclidean"]) == 2
    assert main(["capacitor", "--shape", "sphere(1)", "--n", "9", "--r", "1.5"]) == 2
