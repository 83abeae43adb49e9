import json
import math

import numpy as np
import pytest

from rkhsnorm import KernelSpec, make_dyadic_schedule
from rkhsnorm.testbed import (
    CertificationRefused,
    ExperimentConfig,
    SampleFormatError,
    certify_from_samples,
    get_function,
    read_holdout_csv,
    read_samples_csv,
    registry,
    report_json,
    run_table_experiments,
    sample_function,
    verification_grid,
    write_holdout_csv,
    write_samples_csv,
)

M0 = KernelSpec(0)


def test_registry_contents():
    names = [tf.name for tf in registry()]
    assert names == ["abs", "x2", "exp", "bump", "sin", "f1", "f2", "quad2", "franke"]
    assert [tf.dimension for tf in registry()] == [1] * 6 + [2] * 3
    with pytest.raises(KeyError, match="unknown"):
        get_function("nope")


@pytest.mark.parametrize("name,expected", [
    ("abs", math.sqrt(7 / 3)), ("x2", math.sqrt(38 / 15)),
])
def test_analytic_norms(name, expected):
    assert get_function(name).true_norm(M0) == pytest.approx(expected, rel=1e-12)


def test_quadrature_norms_for_other_functions():
    # sin(2 pi x) on [-1, 1]: (1/2)(4 pi^2 + 1) * 1 + 0 boundary terms
    assert get_function("sin").true_norm(M0) == pytest.approx(math.sqrt(2 * math.pi**2 + 0.5),
                                                             rel=1e-12)
    assert get_function("abs").true_norm(KernelSpec(1)) is None


def test_f1_derivative_matches():
    tf = get_function("f1")
    x = np.linspace(-0.9, 0.9, 7)
    num = (tf(x + 1e-6) - tf(x - 1e-6)) / 2e-6
    assert np.allclose(tf.derivative(x), num, atol=1e-7)


def test_franke_known_value():
    assert get_function("franke")(np.array([0.0, 0.0]))[0] == pytest.approx(0.7664, abs=1e-4)


@pytest.fixture(scope="module")
def abs_tables():
    return run_table_experiments([KernelSpec(o) for o in (0, 1, 2)],
                                 ExperimentConfig(functions=("abs",)))


def test_table_cells(abs_tables):
    r = abs_tables
    assert r.cell("abs", 0).status == "ok"
    assert r.cell("abs", 1).status == "diverging" and r.cell("abs", 2).status == "diverging"
    assert r.passed
    lines = r.table_csv("norms").splitlines()
    assert lines[0].startswith("function,m0_alg1")
    assert lines[1].split(",")[4] == "—"
    assert r.table_csv("exponents", header_lines=["x"]).startswith("# x\n")


def test_cell_errors_stay_in_the_cell():
    cfg = ExperimentConfig(functions=("x2",), levels_1d=2)
    r = run_table_experiments([M0], cfg)
    c = r.cell("x2", 0)
    assert c.status == "error" and "4 levels" in c.error


def _samples_text():
    return "dim,1\n0,-1,1\n0,1,1\n1,-1,1\n1,0,0\n1,1,1\n"


class TestSamplesCsv:
    def test_parse(self):
        s = read_samples_csv(_samples_text())
        assert s.dim == 1 and [len(X) for X in s.levels] == [2, 3]

    def test_round_trip(self, tmp_path):
        tf = get_function("franke")
        s = sample_function(tf, make_dyadic_schedule(tf.domain, 3, 3))
        write_samples_csv(tmp_path / "s.csv", s, ["h"])
        back = read_samples_csv(tmp_path / "s.csv")
        assert back.domain == tf.domain
        for a, b in zip(s.values, back.values):
            assert np.array_equal(a, b)

    @pytest.mark.parametrize("text,msg", [
        ("", "empty"),
        ("dims,1\n", ":1: expected header"),
        ("dim,1\n0,a,1\n", ":2: non-numeric"),
        ("dim,1\n0,0\n", ":2: expected 3 fields"),
        ("dim,1\n0,0,1\n2,0,1\n", "without gaps"),
        ("dim,1\n0,0,1\n1,1,1\n", "not nested"),
        ("dim,1\n0,0,1\n1,0,2\n1,1,1\n", ":3: value differs"),
        ("dim,1\n0,0,nan\n", ":2: non-finite"),
    ])
    def test_errors_name_the_line(self, text, msg):
        with pytest.raises(SampleFormatError, match=msg):
            read_samples_csv(text + ("\n" if "\n" not in text else ""))

    def test_missing_file(self, tmp_path):
        with pytest.raises(SampleFormatError, match="cannot read"):
            read_samples_csv(tmp_path / "missing.csv")

    def test_holdout(self, tmp_path):
        write_holdout_csv(tmp_path / "h.csv", np.array([[0.0], [0.5]]), [1.0, 2.0])
        pts, vals = read_holdout_csv(tmp_path / "h.csv", dim=1)
        assert pts.shape == (2, 1) and vals.tolist() == [1.0, 2.0]
        with pytest.raises(SampleFormatError, match="dimension"):
            read_holdout_csv(tmp_path / "h.csv", dim=2)


def _sin_samples():
    tf = get_function("sin")
    return tf, sample_function(tf, ExperimentConfig().schedule(tf.domain))


class TestCertify:
    def test_sin_passes(self):
        tf, s = _sin_samples()
        g = verification_grid(tf.domain)
        r = certify_from_samples(s, M0, g, tf(g))
        assert r.passed and r.violations == 0 and r.grid_size == 1000
        assert r.subset_size == 50 and r.bound_source == "algorithm2"
        assert r.norm_bound >= r.interpolant_norm
        d = json.loads(report_json(r, {"k": 1}))
        assert d["config"] == {"k": 1} and d["passed"]

    def test_seeded_subset(self):
        tf, s = _sin_samples()
        g = verification_grid(tf.domain, 50)
        a = certify_from_samples(s, M0, g, tf(g), seed=1)
        b = certify_from_samples(s, M0, g, tf(g), seed=1)
        c = certify_from_samples(s, M0, g, tf(g), seed=2)
        assert np.array_equal(a.centers, b.centers) and not np.array_equal(a.centers, c.centers)

    def test_low_override_refuted(self):
        tf, s = _sin_samples()
        g = verification_grid(tf.domain)
        r0 = certify_from_samples(s, M0, g, tf(g))
        with pytest.raises(ValueError, match="below"):
            certify_from_samples(s, M0, g, tf(g), override_bound=r0.norm_bound / 2)
        r = certify_from_samples(s, M0, g, tf(g), override_bound=r0.norm_bound / 2,
                                 bound_form="tight", allow_inconsistent=True)
        assert not r.passed and not r.norm_consistent and r.violations > 0

    def test_diverging_refused(self):
        tf = get_function("abs")
        s = sample_function(tf, ExperimentConfig().schedule(tf.domain))
        g = verification_grid(tf.domain, 11)
        with pytest.raises(CertificationRefused):
            certify_from_samples(s, KernelSpec(1), g, tf(g))

    def test_surface_rows(self):
        tf, s = _sin_samples()
        g = verification_grid(tf.domain, 5)
        rows = list(certify_from_samples(s, M0, g, tf(g)).surface_rows())
        assert len(rows) == 5 and len(rows[0]) == 6
