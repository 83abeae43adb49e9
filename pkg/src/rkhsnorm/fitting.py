"""
Least-squares fits behind the two norm estimators.

``fit_saturating`` fits ``y ~ c1 - c1p * h**beta`` by variable projection:
for fixed ``beta`` the model is linear in ``(c1, c1p)``, so the residual
sum of squares becomes a one-dimensional profile in ``beta`` which is
scanned on a coarse grid and refined by golden-section search.

``fit_powerlaw`` fits ``y ~ c2 * h**beta2`` by ordinary least squares on
``log y`` against ``log h``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

__all__ = [
    "FitError",
    "SaturatingFit",
    "PowerLawFit",
    "GrowthFit",
    "fit_saturating",
    "fit_powerlaw",
    "fit_growth",
    "golden_section",
]

DEFAULT_BETA_RANGE = (0.05, 2.0)
_SCAN_POINTS = 64
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class FitError(ValueError):
    """Raised when a fit has too little data or no admissible parameters."""


@dataclass
class SaturatingFit:
    c1: float
    c1_prime: float
    beta1: float
    residual_rms: float
    residuals: np.ndarray = field(default=None, repr=False)
    profile: tuple = field(default=None, repr=False)
    constrained: bool = False

    def __call__(self, h):
        return self.c1 - self.c1_prime * np.asarray(h, dtype=float) ** self.beta1

    def to_dict(self) -> dict:
        betas, rss = self.profile if self.profile is not None else ([], [])
        return {
            "model": "c1 - c1_prime * h**beta1",
            "c1": self.c1,
            "c1_prime": self.c1_prime,
            "beta1": self.beta1,
            "residual_rms": self.residual_rms,
            "residuals": [] if self.residuals is None else [float(r) for r in self.residuals],
            "constrained": self.constrained,
            "beta_scan": {"beta": [float(b) for b in betas], "rss": [float(r) for r in rss]},
        }


@dataclass
class PowerLawFit:
    c2: float
    beta2: float
    residual_rms_log: float
    residuals_log: np.ndarray = field(default=None, repr=False)
    envelope: bool = False

    def __call__(self, h):
        return self.c2 * np.asarray(h, dtype=float) ** self.beta2

    def to_dict(self) -> dict:
        return {
            "model": "c2 * h**beta2",
            "c2": self.c2,
            "beta2": self.beta2,
            "residual_rms_log": self.residual_rms_log,
            "envelope": self.envelope,
            "residuals_log": [] if self.residuals_log is None else [float(r) for r in self.residuals_log],
        }


@dataclass
class GrowthFit:
    """``y ~ a + b * h**(-gamma)`` with ``b, gamma > 0``: unbounded as ``h -> 0``."""

    a: float
    b: float
    gamma: float
    residual_rms: float

    def __call__(self, h):
        return self.a + self.b * np.asarray(h, dtype=float) ** (-self.gamma)


def golden_section(fun, lo: float, hi: float, tol: float = 1e-10, maxiter: int = 200):
    """Minimise a unimodal ``fun`` on ``[lo, hi]``; returns ``(x, fun(x))``."""
    a, b = float(lo), float(hi)
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(maxiter):
        if b - a <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fun(d)
    x = c if fc <= fd else d
    return x, min(fc, fd)


def _check_xy(h, y, minimum):
    h = np.asarray(h, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if h.shape != y.shape:
        raise FitError(f"h and y differ in length ({h.size} vs {y.size})")
    if h.size < minimum:
        raise FitError(f"need at least {minimum} data pairs, got {h.size}")
    if not np.all(np.isfinite(h)) or not np.all(np.isfinite(y)):
        raise FitError("data must be finite")
    if np.any(h <= 0):
        raise FitError("abscissae h must be positive")
    return h, y


def _linear_solve(h, y, beta, ymax):
    """Best ``(c1, c1p)`` for fixed beta, with ``c1 >= max(y)`` enforced.

    Returns ``(c1, c1p, rss, constrained)``; ``c1p`` may be nonpositive,
    which callers treat as infeasible.
    """
    g = h**beta
    B = np.column_stack([np.ones_like(g), -g])
    coef, *_ = np.linalg.lstsq(B, y, rcond=None)
    c1, c1p = coef
    constrained = False
    if c1 < ymax:
        # active constraint c1 = max(y); one-parameter fit for c1p
        c1 = ymax
        gg = g @ g
        c1p = (g @ (c1 - y)) / gg if gg > 0 else 0.0
        constrained = True
    r = y - (c1 - c1p * g)
    return float(c1), float(c1p), float(r @ r), constrained


def fit_saturating(h, y, beta_range=DEFAULT_BETA_RANGE, space: str = "linear",
                   tol: float = 1e-10) -> SaturatingFit:
    """Fit ``y ~ c1 - c1p * h**beta`` with ``c1p > 0`` and ``c1 >= max(y)``.

    Parameters
    ----------
    h, y : array_like
        At least four pairs; ``h`` positive, ``y`` expected to grow as ``h``
        shrinks (violations only warn).
    beta_range : (float, float)
        Search interval for the exponent.
    space : {"linear", "log"}
        ``"log"`` refits the residuals ``log y - log model`` starting from the
        linear solution.
    tol : float
        Relative bracket width at which golden-section search stops.
    """
    h, y = _check_xy(h, y, 4)
    lo, hi = map(float, beta_range)
    if not 0 < lo < hi:
        raise FitError(f"beta_range must satisfy 0 < lo < hi, got {beta_range}")
    order = np.argsort(-h)
    if np.any(np.diff(y[order]) < -1e-12 * max(1.0, np.max(np.abs(y)))):
        warnings.warn("y is not non-decreasing as h decreases", RuntimeWarning, stacklevel=2)
    ymax = float(y.max())

    betas = np.linspace(lo, hi, _SCAN_POINTS)
    rss = np.full(betas.size, np.inf)
    for i, b in enumerate(betas):
        c1, c1p, r, _ = _linear_solve(h, y, b, ymax)
        if c1p > 0:
            rss[i] = r
    if not np.isfinite(rss).any():
        raise FitError(
            "no admissible beta with c1_prime > 0; profile (beta, c1_prime): "
            + ", ".join(f"({b:.3g}, {_linear_solve(h, y, b, ymax)[1]:.3g})" for b in betas[::8])
        )
    k = int(np.argmin(rss))
    a = betas[max(k - 1, 0)]
    b = betas[min(k + 1, betas.size - 1)]

    def profile(beta):
        c1, c1p, r, _ = _linear_solve(h, y, beta, ymax)
        return r if c1p > 0 else np.inf

    beta, _ = golden_section(profile, a, b, tol=tol)
    c1, c1p, r, constrained = _linear_solve(h, y, beta, ymax)

    if space == "log":
        if np.any(y <= 0):
            raise FitError("log-space fit needs positive ordinates")

        def resid(p):
            m = p[0] - p[1] * h ** p[2]
            return np.log(y) - np.log(np.maximum(m, 1e-300))

        sol = least_squares(resid, [c1, c1p, beta], bounds=([ymax, 0.0, lo], [np.inf, np.inf, hi]))
        c1, c1p, beta = map(float, sol.x)
        constrained = bool(np.isclose(c1, ymax))
    elif space != "linear":
        raise ValueError(f"unknown space {space!r}")

    res = y - (c1 - c1p * h**beta)
    return SaturatingFit(
        c1=float(c1),
        c1_prime=float(c1p),
        beta1=float(beta),
        residual_rms=float(np.sqrt(np.mean(res**2))),
        residuals=res,
        profile=(betas, rss),
        constrained=constrained,
    )


def fit_powerlaw(h, y, envelope: bool = False) -> PowerLawFit:
    """``y ~ c2 * h**beta2`` via least squares on ``(log h, log y)``.

    With ``envelope=True`` the slope is kept and the intercept raised until
    the fitted curve lies on or above every data point, which is the
    conservative choice when the fit feeds an upper bound.
    """
    h, y = _check_xy(h, y, 3)
    if np.any(y <= 0):
        raise FitError("power-law fit needs positive ordinates; a zero suggests the function is captured exactly")
    lh, ly = np.log(h), np.log(y)
    A = np.column_stack([np.ones_like(lh), lh])
    (intercept, slope), *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = ly - (intercept + slope * lh)
    if envelope:
        shift = float(res.max())
        intercept += shift
        res = res - shift
    return PowerLawFit(
        c2=float(np.exp(intercept)),
        beta2=float(slope),
        residual_rms_log=float(np.sqrt(np.mean(res**2))),
        residuals_log=res,
        envelope=envelope,
    )


def fit_growth(h, y, gamma_range=(0.01, 4.0)) -> GrowthFit:
    """Fit the unbounded model ``y ~ a + b * h**(-gamma)`` with ``b > 0``."""
    h, y = _check_xy(h, y, 3)
    lo, hi = gamma_range
    best = None

    def solve(gamma):
        g = h ** (-gamma)
        B = np.column_stack([np.ones_like(g), g])
        (a, b), *_ = np.linalg.lstsq(B, y, rcond=None)
        r = y - (a + b * g)
        return float(a), float(b), float(r @ r)

    def profile(gamma):
        a, b, r = solve(gamma)
        return r if b > 0 else np.inf

    gammas = np.linspace(lo, hi, _SCAN_POINTS)
    vals = np.array([profile(g) for g in gammas])
    if not np.isfinite(vals).any():
        raise FitError("no admissible growth exponent with b > 0")
    k = int(np.argmin(vals))
    gamma, _ = golden_section(profile, gammas[max(k - 1, 0)], gammas[min(k + 1, gammas.size - 1)])
    a, b, r = solve(gamma)
    best = GrowthFit(a=a, b=b, gamma=float(gamma), residual_rms=float(np.sqrt(r / h.size)))
    return best
