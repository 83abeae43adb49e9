import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rkhsnorm.geometry import BoxDomain, PointSet
from rkhsnorm.kernel import KernelSpec, cross_vector, eval_kernel, kernel_matrix

I = BoxDomain.interval(-1.0, 1.0)
U = BoxDomain.interval(0.0, 1.0)


def test_eval_examples():
    assert eval_kernel(KernelSpec(0), 0.0, 0.0) == 1.0
    assert eval_kernel(KernelSpec(0), 0.0, 1.0) == pytest.approx(math.exp(-1))
    assert eval_kernel(KernelSpec(2), 0.0, 1.0) == pytest.approx(7 / 3 * math.exp(-1))


def test_matrix_examples():
    A = kernel_matrix(KernelSpec(0), PointSet(np.array([0.0, 1.0]), U))
    assert np.allclose(A, [[1, math.exp(-1)], [math.exp(-1), 1]])
    for o in (0, 1, 2):
        assert kernel_matrix(KernelSpec(o, 3.0), PointSet(np.array([0.3]), U)).tolist() == [[1.0]]
    B = kernel_matrix(KernelSpec(1), PointSet(np.array([0.0, 0.5, 1.0]), U))
    assert B[0, 2] == pytest.approx(2 * math.exp(-1))


def test_cross_vector_examples():
    X = PointSet(np.array([0.0, 1.0]), U)
    assert np.allclose(cross_vector(KernelSpec(0), X, 0.5), [math.exp(-0.5)] * 2)
    assert cross_vector(KernelSpec(1), X, 1.0)[1] == 1.0
    v = cross_vector(KernelSpec(2, 2.0), PointSet(np.array([0.0]), U), 1.0)
    assert v[0] == pytest.approx((1 + 2 + 4 / 3) * math.exp(-2), rel=1e-12)
    # (13/3) e^-2 = 0.586453
    assert v[0] == pytest.approx(0.586453, abs=1e-6)


def test_spec_validation_and_json():
    with pytest.raises(ValueError):
        KernelSpec(3)
    with pytest.raises(ValueError):
        KernelSpec(0, -1.0)
    s = KernelSpec(2, 0.5)
    assert KernelSpec.from_json(s.to_json()) == s


@settings(max_examples=50, deadline=None)
@given(order=st.sampled_from([0, 1, 2]), eps=st.floats(0.1, 10),
       x=st.floats(-3, 3), z=st.floats(-3, 3))
def test_symmetric_and_bounded(order, eps, x, z):
    spec = KernelSpec(order, eps)
    assert eval_kernel(spec, x, z) == eval_kernel(spec, z, x)
    assert 0 < eval_kernel(spec, x, z) <= 1.0


@settings(max_examples=30, deadline=None)
@given(order=st.sampled_from([0, 1, 2]), seed=st.integers(0, 10_000))
def test_matrix_positive_definite(order, seed):
    x = np.unique(np.random.default_rng(seed).uniform(-1, 1, 12))
    A = kernel_matrix(KernelSpec(order), PointSet(x, I))
    assert np.array_equal(A, A.T)
    assert np.all(np.diag(A) == 1.0)
    assert np.linalg.eigvalsh(A).min() > -1e-12
