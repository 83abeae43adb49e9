import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rkhsnorm.fitting import FitError, fit_growth, fit_powerlaw, fit_saturating, golden_section

import fig3_data as fig3

H = 0.5 ** np.arange(1, 9)


def test_linear_recovery():
    fit = fit_saturating(H, 9 - 2 * H)
    assert (fit.c1, fit.c1_prime, fit.beta1) == pytest.approx((9, 2, 1), abs=1e-6)


def test_noisy_recovery():
    rng = np.random.default_rng(3)
    y = 5 - 3 * H**1.5 + rng.uniform(-1e-9, 1e-9, H.size)
    fit = fit_saturating(H, y)
    assert (fit.c1, fit.c1_prime, fit.beta1) == pytest.approx((5, 3, 1.5), abs=1e-4)


def test_fig3_window_reproduces_legend():
    w = fig3.WINDOW
    fit = fit_saturating(fig3.TOP_H[w:], fig3.TOP_Y[w:])
    assert (fit.c1, fit.c1_prime, fit.beta1) == pytest.approx(fig3.LEGEND_SATURATING, abs=1e-3)


def test_asymptote_never_below_data():
    # flat tail pushes the unconstrained asymptote under the largest value
    y = np.array([1.0, 1.5, 1.8, 2.0, 2.0, 2.0])
    fit = fit_saturating(H[:6], y)
    assert fit.c1 >= y.max()


def test_saturating_needs_four_points():
    with pytest.raises(FitError):
        fit_saturating(H[:3], 1 - H[:3])


def test_powerlaw_examples():
    fit = fit_powerlaw(H, 2 * H**0.5)
    assert (fit.c2, fit.beta2) == pytest.approx((2, 0.5), abs=1e-10)
    flat = fit_powerlaw([0.5, 0.25, 0.125], [1, 1, 1])
    assert flat.beta2 == pytest.approx(0, abs=1e-12) and flat.c2 == pytest.approx(1)


def test_powerlaw_envelope_lies_above_data():
    w = fig3.WINDOW
    ols = fit_powerlaw(fig3.BOTTOM_H[w:], fig3.BOTTOM_INC[w:])
    env = fit_powerlaw(fig3.BOTTOM_H[w:], fig3.BOTTOM_INC[w:], envelope=True)
    assert env.beta2 == ols.beta2
    assert np.all(env(fig3.BOTTOM_H[w:]) >= fig3.BOTTOM_INC[w:] * (1 - 1e-12))
    assert (env.c2, env.beta2) == pytest.approx(fig3.LEGEND_POWERLAW, abs=1e-3)


def test_powerlaw_rejects_zero():
    with pytest.raises(FitError):
        fit_powerlaw([0.5, 0.25, 0.125], [1, 0, 1])


def test_growth_model():
    fit = fit_growth(H, 3 + H**-0.4)
    assert fit.gamma == pytest.approx(0.4, abs=1e-5)


def test_golden_section():
    x, fx = golden_section(lambda t: (t - 0.3) ** 2, 0.0, 1.0)
    assert x == pytest.approx(0.3, abs=1e-8)


@settings(max_examples=60, deadline=None)
@given(c1=st.floats(1, 100), c1p=st.floats(0.1, 10), beta=st.floats(0.2, 3))
def test_saturating_model_recovery(c1, c1p, beta):
    fit = fit_saturating(H, c1 - c1p * H**beta, beta_range=(0.05, 4.0), tol=1e-12)
    assert fit.c1 == pytest.approx(c1, rel=1e-6)
    assert fit.c1_prime == pytest.approx(c1p, rel=1e-6)
    assert fit.beta1 == pytest.approx(beta, abs=1e-6)


@settings(max_examples=60, deadline=None)
@given(c2=st.floats(0.01, 100), beta=st.floats(0.2, 3))
def test_powerlaw_model_recovery(c2, beta):
    fit = fit_powerlaw(H, c2 * H**beta)
    assert fit.c2 == pytest.approx(c2, rel=1e-6)
    assert fit.beta2 == pytest.approx(beta, abs=1e-6)
