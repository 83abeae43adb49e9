import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rkhsnorm.geometry import BoxDomain, PointSet, make_dyadic_schedule
from rkhsnorm.interpolation import (
    Interpolant,
    error_bound,
    error_bound_loose,
    evaluate,
    increment_norm,
    interpolate,
    power_function,
    rkhs_norm,
)
from rkhsnorm.kernel import KernelSpec

U = BoxDomain.interval(0.0, 1.0)
I = BoxDomain.interval(-1.0, 1.0)
M0 = KernelSpec(0)
E1 = math.exp(-1)


def P(*xs, dom=U):
    return PointSet(np.array(xs, dtype=float), dom)


class TestSolve:
    def test_single_point(self):
        s = interpolate(M0, P(0.0), [3.0])
        assert s.coefficients.tolist() == [3.0]
        assert s.norm_squared == pytest.approx(9.0)
        assert rkhs_norm(s) == pytest.approx(3.0)
        assert evaluate(s, 1.0) == pytest.approx(3 * E1)

    def test_reproducing_element(self):
        s = interpolate(M0, P(0.0, 1.0), [1.0, E1])
        assert np.allclose(s.coefficients, [1.0, 0.0], atol=1e-14)
        assert rkhs_norm(s) == pytest.approx(1.0)

    def test_constant_pair(self):
        s = interpolate(M0, P(0.0, 1.0), [1.0, 1.0])
        assert np.allclose(s.coefficients, 1 / (1 + E1))
        assert s.norm_squared == pytest.approx(2 / (1 + E1))
        assert rkhs_norm(s) == pytest.approx(1.20918, abs=1e-5)
        assert evaluate(s, 0.5) == pytest.approx(2 * math.exp(-0.5) / (1 + E1))
        # 2 e^-0.5 / (1 + e^-1) = 0.886819
        assert evaluate(s, 0.5) == pytest.approx(0.886819, abs=1e-6)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            interpolate(M0, P(0.0, 1.0), [1.0])

    def test_json_round_trip(self):
        s = interpolate(KernelSpec(1, 2.0), P(0.0, 0.4, 1.0), [1.0, -2.0, 0.5])
        t = Interpolant.from_json(s.to_json())
        y = np.linspace(0, 1, 11)
        assert np.allclose(s(y), t(y), rtol=0, atol=1e-15)
        assert t.norm_squared == s.norm_squared


class TestIncrement:
    def test_same_set(self):
        X = P(0.0, 0.5, 1.0)
        assert increment_norm(M0, X, X, [1.0, 2.0, 3.0]) == pytest.approx(0.0, abs=1e-12)

    def test_coarse_exact(self):
        assert increment_norm(M0, P(0.0), P(0.0, 1.0), [1.0, E1]) == pytest.approx(0.0, abs=1e-12)

    def test_constant_three_points(self):
        fine = interpolate(M0, P(0.0, 0.5, 1.0), np.ones(3))
        expected = math.sqrt(fine.norm_squared - 2 / (1 + E1))
        got = increment_norm(M0, P(0.0, 1.0), P(0.0, 0.5, 1.0), np.ones(3))
        assert got == pytest.approx(expected, rel=1e-10)

    def test_not_nested(self):
        with pytest.raises(ValueError):
            increment_norm(M0, P(0.2), P(0.0, 1.0), [1.0, 1.0])


class TestPowerAndBounds:
    def test_single_center(self):
        X = P(0.0)
        for t in (0.1, 0.5, 1.0):
            assert power_function(M0, X, t) == pytest.approx(math.sqrt(1 - math.exp(-2 * t)))
        assert power_function(M0, X, 0.0) == 0.0

    def test_zero_at_nodes(self):
        X = PointSet(np.linspace(0, 1, 9), U)
        for x in X.points[:, 0]:
            assert power_function(KernelSpec(1), X, x) <= 1e-7

    def test_error_bound_examples(self):
        s = interpolate(M0, P(0.0), [1.0])
        assert error_bound(s, 1.0, 1.0) == pytest.approx(0.0, abs=1e-15)
        s2 = interpolate(M0, P(0.0, 0.5, 1.0), [0.0, 1.0, 0.0])
        assert error_bound(s2, 5.0, 0.5) == pytest.approx(0.0, abs=1e-7)
        assert np.allclose(error_bound(s2, s2.norm, np.linspace(0, 1, 7)), 0.0)
        assert error_bound_loose(s2, 5.0, 0.25) > 0

    def test_bound_below_norm_rejected(self):
        s = interpolate(M0, P(0.0), [3.0])
        with pytest.raises(ValueError, match="below"):
            error_bound(s, 2.0, 0.5)


def _nested_pair(seed, n_fine, frac):
    rng = np.random.default_rng(seed)
    x = np.unique(rng.uniform(-1, 1, n_fine))
    k = max(1, int(frac * len(x)))
    coarse = np.sort(rng.choice(x, size=k, replace=False))
    return PointSet(coarse, I), PointSet(x, I)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(3, 100), frac=st.floats(0.1, 0.9),
       order=st.sampled_from([0, 1]))
def test_pythagoras(seed, n, frac, order):
    Xc, Xf = _nested_pair(seed, n, frac)
    spec = KernelSpec(order)
    rng = np.random.default_rng(seed + 1)
    freq, phase = rng.uniform(0.5, 4), rng.uniform(0, 2 * np.pi)
    f = lambda x: np.sin(freq * x[:, 0] + phase) + 0.3 * x[:, 0]
    sc, sf = interpolate(spec, Xc, f(Xc.points)), interpolate(spec, Xf, f(Xf.points))
    inc = increment_norm(spec, Xc, Xf, f(Xf.points))
    assert sf.norm_squared == pytest.approx(sc.norm_squared + inc**2, rel=1e-6)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), order=st.sampled_from([0, 1, 2]))
def test_node_exactness(seed, order):
    # jittered grid: random but quasi-uniform, so conditioning stays within extended precision
    rng = np.random.default_rng(seed)
    n = 40
    x = np.linspace(-1, 1, n) + rng.uniform(-0.25, 0.25, n) * (2 / (n - 1))
    X = PointSet(np.clip(x, -1, 1), I)
    y = rng.normal(size=len(X))
    s = interpolate(KernelSpec(order), X, y)
    assert np.allclose(s(X.points), y, rtol=1e-8, atol=1e-8 * np.abs(y).max())


@pytest.mark.parametrize("order", [0, 1, 2])
def test_norm_monotone_along_schedule(order):
    sched = make_dyadic_schedule(I, 3, 6)
    f = lambda x: np.exp(-0.5 * x[:, 0])
    norms = [interpolate(KernelSpec(order), X, f(X.points)).norm_squared for X in sched]
    assert all(b >= a * (1 - 1e-10) for a, b in zip(norms, norms[1:]))


def test_extended_precision_for_matern2():
    X = make_dyadic_schedule(I, 3, 9)[-1]
    s = interpolate(KernelSpec(2), X, np.exp(-0.5 * X.points[:, 0]))
    assert s.diagnostics.precision == "extended"
    assert np.allclose(s(X.points), np.exp(-0.5 * X.points[:, 0]), rtol=1e-8)
