import json
import math

import numpy as np
import pytest

from rkhsnorm import KernelSpec, algorithm1, algorithm2, build_trace
from rkhsnorm.cli import main
from rkhsnorm.kernel import cross_matrix
from rkhsnorm.testbed import ExperimentConfig, SampleData, get_function, write_samples_csv


@pytest.fixture(scope="module")
def sin_files(tmp_path_factory):
    out = tmp_path_factory.mktemp("sin")
    assert main(["trace", "--function", "sin", "--emit-samples", "--emit-holdout",
                 "--out", str(out), "--quiet"]) == 0
    return out


def test_tables_abs(tmp_path, capsys):
    code = main(["tables", "--kernels", "0,1,2", "--functions", "abs", "--out", str(tmp_path),
                 "--quiet"])
    assert code == 0
    for name in ("table1.csv", "table2.csv", "summary.txt", "report.json", "failures.json"):
        assert (tmp_path / name).exists()
    assert sorted(p.name for p in (tmp_path / "traces").iterdir()) == [
        "abs_m0.csv", "abs_m1.csv", "abs_m2.csv"]
    rows = [l for l in (tmp_path / "table1.csv").read_text().splitlines() if not l.startswith("#")]
    assert len(rows) == 2
    cells = rows[1].split(",")
    assert float(cells[1]) > 0 and cells[4] == "—" and cells[7] == "—"
    assert json.loads((tmp_path / "failures.json").read_text())["failures"] == []
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["config"]["kernels"] == [0, 1, 2]


def test_tables_max_level_advisory(tmp_path, capsys):
    main(["tables", "--functions", "x2", "--max-level", "3", "--out", str(tmp_path), "--quiet"])
    assert "advisory" in capsys.readouterr().err
    assert (tmp_path / "table1.csv").exists()


def test_tables_unknown_function(tmp_path):
    assert main(["tables", "--functions", "nope", "--out", str(tmp_path)]) == 2


def test_bad_arguments():
    assert main(["estimate"]) == 2
    assert main(["tables", "--kernel-order", "5"]) == 2


def test_trace_estimate_round_trip(sin_files, tmp_path):
    assert main(["estimate", str(sin_files / "trace_sin.csv"), "--out", str(tmp_path)]) == 0
    est = json.loads((tmp_path / "estimate.json").read_text())
    tf = get_function("sin")
    trace = build_trace(KernelSpec(0), ExperimentConfig().schedule(tf.domain), tf)
    a1 = algorithm1(trace, beta_max=6.0).norm_estimate
    a2 = algorithm2(trace).norm_estimate
    assert est["algorithm1"]["norm_estimate"] == pytest.approx(a1, rel=1e-12)
    assert est["algorithm2"]["norm_estimate"] == pytest.approx(a2, rel=1e-12)


def test_estimate_from_samples_matches_trace(sin_files, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["estimate", str(sin_files / "samples.csv"), "--out", str(a)]) == 0
    assert main(["estimate", str(sin_files / "trace_sin.csv"), "--out", str(b)]) == 0
    ea = json.loads((a / "estimate.json").read_text())
    eb = json.loads((b / "estimate.json").read_text())
    for k in ("algorithm1", "algorithm2"):
        assert ea[k]["norm_estimate"] == pytest.approx(eb[k]["norm_estimate"], rel=1e-12)
    true = math.sqrt(2 * math.pi**2 + 0.5)
    assert ea["algorithm2"]["norm_estimate"] >= ea["algorithm1"]["norm_estimate"]
    assert ea["algorithm1"]["norm_estimate"] == pytest.approx(true, rel=0.01)
    assert ea["algorithm2"]["norm_estimate"] == pytest.approx(true, rel=0.01)


def test_estimate_finite_expansion(tmp_path, capsys):
    spec = KernelSpec(1)
    tf = get_function("exp")
    sched = ExperimentConfig(levels_1d=5).schedule(tf.domain)
    C = sched[0]
    coef = np.array([0.5, -1.0, 2.0])
    vals = [coef @ cross_matrix(spec, C, X.points) for X in sched]
    write_samples_csv(tmp_path / "s.csv", SampleData(tf.domain, list(sched), vals))
    exact = math.sqrt(coef @ cross_matrix(spec, C, C.points) @ coef)
    assert main(["estimate", str(tmp_path / "s.csv"), "--kernel-order", "1",
                 "--out", str(tmp_path)]) == 0
    est = json.loads((tmp_path / "estimate.json").read_text())
    for k in ("algorithm1", "algorithm2"):
        assert est[k]["norm_estimate"] == pytest.approx(exact, rel=1e-8)
        assert est[k]["exact"]


def test_estimate_diverging(tmp_path, capsys):
    assert main(["trace", "--function", "abs", "--emit-samples", "--out", str(tmp_path)]) == 0
    code = main(["estimate", str(tmp_path / "samples.csv"), "--kernel-order", "1",
                 "--out", str(tmp_path)])
    assert code == 3
    assert "outside the native space" in capsys.readouterr().err


def test_estimate_schema_error(tmp_path, capsys):
    (tmp_path / "bad.csv").write_text("dim,1\n0,0,1\n0,zz,1\n")
    assert main(["estimate", str(tmp_path / "bad.csv"), "--out", str(tmp_path)]) == 2
    assert ":3:" in capsys.readouterr().err


def test_certify(sin_files, tmp_path, capsys):
    s, h = str(sin_files / "samples.csv"), str(sin_files / "holdout.csv")
    assert main(["certify", s, h, "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "certify.json").read_text())
    assert rep["violations"] == 0 and rep["grid_size"] == 1000 and rep["max_ratio"] < 1
    surface = (tmp_path / "surface.csv").read_text().splitlines()
    assert surface[2] == "x1,value,prediction,error,bound,ratio" and len(surface) == 1003

    half = rep["norm_bound"] / 2
    assert main(["certify", s, h, "--override-bound", str(half), "--bound", "tight",
                 "--out", str(tmp_path)]) == 1
    rep = json.loads((tmp_path / "certify.json").read_text())
    assert rep["violations"] > 0 and rep["bound_source"] == "override"

    assert main(["certify", s, str(tmp_path / "missing.csv"), "--out", str(tmp_path)]) == 2


def test_certify_diverging(tmp_path):
    main(["trace", "--function", "abs", "--emit-samples", "--emit-holdout", "--out",
          str(tmp_path)])
    assert main(["certify", str(tmp_path / "samples.csv"), str(tmp_path / "holdout.csv"),
                 "--kernel-order", "2", "--out", str(tmp_path)]) == 3


@pytest.mark.parametrize("fmt,name", [("gnuplot", "trace_x2.dat"), ("json", "trace_x2.json")])
def test_trace_formats(tmp_path, fmt, name):
    assert main(["trace", "--function", "x2", "--format", fmt, "--out", str(tmp_path)]) == 0
    text = (tmp_path / name).read_text()
    if fmt == "json":
        assert len(json.loads(text)["norm_squared"]) == 8
    else:
        data = [l for l in text.splitlines() if not l.startswith("#")]
        assert len(data) == 8 and "," not in data[0]


def test_deterministic_output(tmp_path):
    for d in ("a", "b"):
        assert main(["trace", "--function", "franke", "--levels", "4", "--emit-samples",
                     "--out", str(tmp_path / d)]) == 0
    for name in ("trace_franke.csv", "samples.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("RKHSNORM_OUT", str(tmp_path / "env"))
    assert main(["trace", "--function", "x2"]) == 0
    assert (tmp_path / "env" / "trace_x2.csv").exists()


def test_config_header(sin_files):
    head = (sin_files / "trace_sin.csv").read_text().splitlines()[:2]
    assert head[0] == "# rkhsnorm trace"
    cfg = json.loads(head[1][len("# config "):])
    assert cfg["function"] == "sin" and cfg["kernel_order"] == 0 and "out" not in cfg
