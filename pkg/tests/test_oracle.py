import math

import numpy as np
import pytest

from rkhsnorm import BoxDomain, KernelSpec, PointSet
from rkhsnorm.kernel import cross_matrix, kernel_matrix
from rkhsnorm.oracle import composite_rule, dense_reference_norm, exp_kernel_norm, gauss_legendre

I = BoxDomain.interval(-1.0, 1.0)
M0 = KernelSpec(0)


def test_gauss_legendre_exact_for_polynomials():
    r = gauss_legendre(0.0, 2.0, 5)
    assert r.integrate(lambda x: x**9) == pytest.approx(2**10 / 10, rel=1e-13)


def test_composite_rule_respects_breaks():
    r = composite_rule(-1.0, 1.0, 256, breaks=[0.0])
    assert r.integrate(np.abs) == pytest.approx(1.0, rel=1e-14)
    assert r.weights.sum() == pytest.approx(2.0, rel=1e-14)


def test_abs():
    v = exp_kernel_norm(np.abs, np.sign, -1, 1, kinks=[0.0])
    assert v == pytest.approx(math.sqrt(7 / 3), rel=1e-12)


def test_square():
    v = exp_kernel_norm(lambda x: x**2, lambda x: 2 * x, -1, 1)
    assert v == pytest.approx(math.sqrt(38 / 15), rel=1e-12)


@pytest.mark.parametrize("a,b,eps", [(0.0, 1.0, 1.0), (-1.0, 2.0, 0.7), (0.5, 3.0, 2.5)])
def test_reproducing_element(a, b, eps):
    f = lambda x: np.exp(-eps * np.abs(x - a))
    df = lambda x: -eps * np.sign(x - a) * np.exp(-eps * np.abs(x - a))
    assert exp_kernel_norm(f, df, a, b, eps=eps) == pytest.approx(1.0, rel=1e-12)


def test_needs_derivative():
    with pytest.raises(ValueError, match="derivative"):
        exp_kernel_norm(np.abs, None, -1, 1)


@pytest.mark.parametrize("order", [0, 1, 2])
def test_dense_reference_exact_on_finite_expansion(order):
    spec = KernelSpec(order)
    C = PointSet(np.array([-1.0, 0.0, 0.5]), I)
    coef = np.array([1.0, -0.5, 2.0])
    exact = math.sqrt(coef @ kernel_matrix(spec, C) @ coef)
    f = lambda x: coef @ cross_matrix(spec, C, x)
    assert dense_reference_norm(spec, f, I, 33) == pytest.approx(exact, rel=1e-8)


def test_dense_abs_from_below():
    ref = dense_reference_norm(M0, lambda x: np.abs(x[:, 0]), I, 2049, full_output=True)
    exact = math.sqrt(7 / 3)
    assert ref.norm <= exact
    assert ref.norm == pytest.approx(exact, rel=5e-3)
    assert ref.norm_half <= ref.norm and ref.points == 2049 and ref.points_half == 1025


def test_dense_needs_odd_grid():
    with pytest.raises(ValueError):
        dense_reference_norm(M0, np.abs, I, 64)
