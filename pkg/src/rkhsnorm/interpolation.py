"""
Minimum-norm kernel interpolation.

For centers ``X`` and data ``y`` the interpolant is
``s(x) = sum_i alpha_i k(x, x_i)`` with ``A_X alpha = y``. Its native-space
norm is available in closed form, ``||s||^2 = alpha^T A_X alpha = alpha^T y``,
which is a lower bound for the norm of any function matching the data.
The power function ``P_X`` turns a norm bound into a pointwise error bound.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._linalg import ConditioningError, Factorization, factorize
from .geometry import BoxDomain, GeometryError, PointSet
from .kernel import KernelSpec, cross_matrix, kernel_matrix

__all__ = [
    "ConditioningError",
    "SolveDiagnostics",
    "Interpolant",
    "interpolate",
    "evaluate",
    "rkhs_norm",
    "increment_norm",
    "increment_between",
    "power_function",
    "power_function_grid",
    "error_bound",
    "error_bound_loose",
]

# relative tolerance of the post-solve checks
CHECK_RTOL = 1e-8
# squared power function values down to this are treated as roundoff
POWER_ROUNDOFF = 1e-10
# relative disagreement between increment computations flagged as a conditioning warning
INCREMENT_RTOL = 1e-5
# iterative refinement steps for ill-conditioned solves
REFINE_STEPS = 3


@dataclass
class SolveDiagnostics:
    matrix_size: int
    smallest_pivot: float
    jitter_used: float = 0.0
    precision: str = "double"
    residual: float = 0.0
    norm_discrepancy: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def approximate(self) -> bool:
        return self.jitter_used > 0.0

    def to_dict(self) -> dict:
        return {
            "matrix_size": self.matrix_size,
            "smallest_pivot": self.smallest_pivot,
            "jitter_used": self.jitter_used,
            "precision": self.precision,
            "residual": self.residual,
            "norm_discrepancy": self.norm_discrepancy,
            "approximate": self.approximate,
            "notes": list(self.notes),
        }


@dataclass(frozen=True, eq=False)
class Interpolant:
    """Kernel interpolant ``s_{f,X}``; immutable once built.

    ``coefficients`` is the float64 view of the expansion coefficients. When
    the solve ran in extended precision the longdouble coefficients are kept
    for norm computations.
    """

    centers: PointSet
    coefficients: np.ndarray
    spec: KernelSpec
    norm_squared: float
    values: np.ndarray | None = None
    diagnostics: SolveDiagnostics | None = None
    _coef: np.ndarray | None = field(default=None, repr=False)
    _factor: Factorization | None = field(default=None, repr=False)

    def __call__(self, Y) -> np.ndarray:
        """Evaluate at the rows of ``Y`` (shape ``(m, d)``, or ``(m,)`` in 1D)."""
        if self._coef is None:
            return self.coefficients @ cross_matrix(self.spec, self.centers, Y)
        # extended-precision solve: rounding the coefficients first loses the node values
        K = cross_matrix(self.spec, self.centers, Y, dtype=self._coef.dtype)
        return np.asarray(self._coef @ K, dtype=float)

    @property
    def norm(self) -> float:
        return float(np.sqrt(self.norm_squared))

    @property
    def factor(self) -> Factorization:
        if self._factor is None:
            object.__setattr__(self, "_factor", factorize(
                lambda dt: kernel_matrix(self.spec, self.centers, dtype=dt)))
        return self._factor

    @property
    def exact_coefficients(self) -> np.ndarray:
        return self.coefficients if self._coef is None else self._coef

    def power(self, Y) -> np.ndarray:
        """Power function at the rows of ``Y``, reusing this interpolant's factorization."""
        return _power_from_factor(self.spec, self.centers, self.factor, Y)

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "domain": self.centers.domain.to_dict(),
            "centers": self.centers.points.tolist(),
            "coefficients": [float(c) for c in self.coefficients],
            "norm_squared": self.norm_squared,
            "diagnostics": None if self.diagnostics is None else self.diagnostics.to_dict(),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "Interpolant":
        domain = BoxDomain(tuple(d["domain"]["lo"]), tuple(d["domain"]["hi"]))
        return cls(
            centers=PointSet(np.asarray(d["centers"], dtype=float), domain),
            coefficients=np.asarray(d["coefficients"], dtype=float),
            spec=KernelSpec.from_dict(d["spec"]),
            norm_squared=float(d["norm_squared"]),
        )

    @classmethod
    def from_json(cls, s: str) -> "Interpolant":
        return cls.from_dict(json.loads(s))


def interpolate(spec: KernelSpec, X: PointSet, values, jitter: bool = False,
                precision: str = "auto") -> Interpolant:
    """Solve ``A_X alpha = y`` by Cholesky and return the interpolant.

    Raises :class:`ConditioningError` when a non-positive pivot appears and
    ``jitter`` is off. With ``jitter=True`` the added diagonal is recorded in
    the diagnostics and the result is flagged approximate.
    """
    y = np.asarray(values, dtype=float).reshape(-1)
    if y.shape[0] != len(X):
        raise ValueError(f"got {y.shape[0]} values for {len(X)} centers")
    fac = factorize(lambda dt: kernel_matrix(spec, X, dtype=dt), precision=precision, jitter=jitter)
    yy = y.astype(fac.dtype)
    coef = fac.solve(yy)
    for _ in range(REFINE_STEPS):
        r = yy - fac.matrix @ coef
        if np.max(np.abs(r)) <= CHECK_RTOL * 1e-3 * max(float(np.max(np.abs(y))), 1e-300):
            break
        coef = coef + fac.solve(r)
    norm_sq = coef @ yy
    norm_sq_quad = fac.quad(coef)
    scale = max(float(np.max(np.abs(y))), np.finfo(float).tiny)
    residual = float(np.max(np.abs(fac.matrix @ coef - yy))) / scale
    disc = float(abs(norm_sq - norm_sq_quad) / max(abs(float(norm_sq)), np.finfo(float).tiny))
    diag = SolveDiagnostics(
        matrix_size=len(X),
        smallest_pivot=fac.smallest_pivot,
        jitter_used=fac.jitter_used,
        precision=fac.precision,
        residual=residual,
        norm_discrepancy=disc,
    )
    if fac.jitter_used:
        diag.notes.append(f"jitter {fac.jitter_used:.3e} added; norms are approximate")
    if residual > CHECK_RTOL:
        diag.notes.append(f"interpolation residual {residual:.2e} exceeds {CHECK_RTOL:g}")
    if disc > CHECK_RTOL:
        diag.notes.append(f"alpha^T y and alpha^T A alpha differ by {disc:.2e} (relative)")
    return Interpolant(
        centers=X,
        coefficients=np.asarray(coef, dtype=float),
        spec=spec,
        norm_squared=max(float(norm_sq), 0.0),
        values=y,
        diagnostics=diag,
        _coef=coef if fac.dtype != np.float64 else None,
        _factor=fac,
    )


def evaluate(s: Interpolant, x) -> float:
    """``sum_i alpha_i k(x, x_i)`` at a single point."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (s.centers.dim,):
        raise ValueError(f"dimension mismatch: point has shape {x.shape}, centers have dimension {s.centers.dim}")
    return float(s(x[None, :])[0])


def rkhs_norm(s: Interpolant) -> float:
    return s.norm


def increment_between(coarse: Interpolant, fine: Interpolant):
    """Norm of ``s_fine - s_coarse`` for nested centers.

    The difference is written as one expansion on the fine centers (fine
    coefficients minus zero-padded coarse ones) and its norm taken from the
    quadratic form, which avoids the cancellation in
    ``||s_fine||^2 - ||s_coarse||^2``. Returns ``(norm, discrepancy)`` where
    ``discrepancy`` is the relative gap to the subtraction formula.
    """
    idx = coarse.centers.index_in(fine.centers)
    fac = fine.factor
    delta = np.array(fine.exact_coefficients, dtype=fac.dtype, copy=True)
    delta[idx] -= np.asarray(coarse.exact_coefficients, dtype=fac.dtype)
    sq = float(fac.quad(delta))
    value = float(np.sqrt(max(sq, 0.0)))
    by_subtraction = float(np.sqrt(max(fine.norm_squared - coarse.norm_squared, 0.0)))
    ref = max(value, by_subtraction)
    disc = 0.0 if ref == 0.0 else abs(value - by_subtraction) / ref
    return value, disc


def increment_norm(spec: KernelSpec, X_coarse: PointSet, X_fine: PointSet, values_fine,
                   precision: str = "auto", full_output: bool = False):
    """Norm of the difference of the interpolants on ``X_coarse`` and ``X_fine``.

    ``X_coarse`` must be an exact subset of ``X_fine``; coarse data are taken
    from ``values_fine``. With ``full_output=True`` returns ``(norm, info)``
    where ``info`` holds the subtraction cross-check.
    """
    values_fine = np.asarray(values_fine, dtype=float).reshape(-1)
    try:
        idx = X_coarse.index_in(X_fine)
    except GeometryError as exc:
        raise GeometryError(f"coarse set is not nested in the fine set: {exc}") from None
    fine = interpolate(spec, X_fine, values_fine, precision=precision)
    coarse = interpolate(spec, X_coarse, values_fine[idx], precision=precision)
    value, disc = increment_between(coarse, fine)
    info = {"discrepancy": disc, "by_subtraction": float(np.sqrt(max(fine.norm_squared - coarse.norm_squared, 0.0)))}
    if disc > INCREMENT_RTOL and value > 1e-6 * fine.norm:
        info["warning"] = f"increment cross-check differs by {disc:.2e} (relative); matrix may be ill-conditioned"
        warnings.warn(info["warning"], RuntimeWarning, stacklevel=2)
    if full_output:
        return value, info
    return value


def _power_from_factor(spec, X, fac, Y) -> np.ndarray:
    K = cross_matrix(spec, X, Y, dtype=fac.dtype)
    W = fac.forward(K)
    sq = 1.0 - np.sum(W * W, axis=0)
    sq = np.asarray(sq, dtype=float)
    worst = float(sq.min()) if sq.size else 0.0
    if worst < -POWER_ROUNDOFF:
        raise ConditioningError(
            f"squared power function {worst:.3e} is negative beyond roundoff",
            smallest_pivot=fac.smallest_pivot,
            size=fac.size,
        )
    return np.sqrt(np.maximum(sq, 0.0))


def power_function_grid(spec: KernelSpec, X: PointSet, Y, precision: str = "auto") -> np.ndarray:
    """Power function at every row of ``Y`` from a single factorization."""
    fac = factorize(lambda dt: kernel_matrix(spec, X, dtype=dt), precision=precision)
    return _power_from_factor(spec, X, fac, Y)


def power_function(spec: KernelSpec, X: PointSet, x, precision: str = "auto") -> float:
    """``sqrt(k(x, x) - b^T A_X^{-1} b)`` with ``b = (k(x, x_i))_i``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (X.dim,):
        raise ValueError(f"dimension mismatch: point has shape {x.shape}, centers have dimension {X.dim}")
    return float(power_function_grid(spec, X, x[None, :], precision=precision)[0])


def _check_bound(s: Interpolant, norm_bound: float) -> float:
    norm_bound = float(norm_bound)
    if norm_bound < s.norm * (1.0 - 1e-12):
        raise ValueError(
            f"norm bound {norm_bound:.6g} is below the interpolant norm {s.norm:.6g}; "
            "the estimate is inconsistent with the data"
        )
    return norm_bound


def error_bound(s: Interpolant, norm_bound: float, x) -> np.ndarray | float:
    """``P_X(x) * sqrt(C^2 - ||s||^2)``; ``x`` may be one point or an array of points."""
    C = _check_bound(s, norm_bound)
    gap = np.sqrt(max(C * C - s.norm_squared, 0.0))
    return _apply_power(s, x) * gap


def error_bound_loose(s: Interpolant, norm_bound: float, x) -> np.ndarray | float:
    """``P_X(x) * C``."""
    C = _check_bound(s, norm_bound)
    return _apply_power(s, x) * C


def _apply_power(s, x):
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 0 or (arr.ndim == 1 and arr.shape[0] == s.centers.dim and s.centers.dim > 1) \
        or (arr.ndim == 1 and s.centers.dim == 1 and arr.shape[0] == 1)
    if single:
        return float(s.power(np.atleast_1d(arr)[None, :])[0])
    return s.power(arr)
