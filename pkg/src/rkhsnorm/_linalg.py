"""Cholesky factorization of kernel matrices in double or extended precision.

Half-integer Matern kernels on fine grids are badly conditioned (the
smallest Cholesky pivot of a 513-point order-2 matrix is ~1e-12), which
puts double precision at the edge of usefulness. When the double
factorization reports tiny pivots, the matrix is rebuilt and factored in
``np.longdouble`` (80-bit on x86-64) with a blocked right-looking
algorithm. Nothing here pivots or regularizes silently.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import lapack, solve_triangular

LD = np.longdouble

# switch to extended precision below this squared pivot (condition >~ 1e6)
EXTENDED_PIVOT_THRESHOLD = 1e-6
# largest matrix factored in extended precision by the "auto" policy
EXTENDED_MAX_SIZE = 2500
_BLOCK = 64


class ConditioningError(np.linalg.LinAlgError):
    """Cholesky factorization met a non-positive pivot."""

    def __init__(self, message, smallest_pivot=None, size=None, index=None):
        super().__init__(message)
        self.smallest_pivot = smallest_pivot
        self.size = size
        self.index = index


def _failed_pivot(A, c, info):
    j = info - 1
    row = np.tril(c)[j, :j]
    return float(A[j, j] - row @ row)


def cholesky_double(A):
    """Lower Cholesky factor via LAPACK ``potrf``; raises on failure."""
    c, info = lapack.dpotrf(A, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        piv = _failed_pivot(A, c, info)
        raise ConditioningError(
            f"non-positive pivot {piv:.3e} at row {info - 1} of a {A.shape[0]}x{A.shape[0]} kernel matrix",
            smallest_pivot=piv,
            size=A.shape[0],
            index=info - 1,
        )
    if info < 0:
        raise ValueError(f"potrf argument {-info} invalid")
    return c


def cholesky_extended(A, block: int = _BLOCK):
    """Blocked right-looking Cholesky in ``np.longdouble``."""
    L = np.array(A, dtype=LD, copy=True)
    n = L.shape[0]
    for k0 in range(0, n, block):
        k1 = min(k0 + block, n)
        for j in range(k0, k1):
            d = L[j, j]
            if not d > 0:
                raise ConditioningError(
                    f"non-positive pivot {float(d):.3e} at row {j} of a {n}x{n} kernel matrix "
                    "(extended precision)",
                    smallest_pivot=float(d),
                    size=n,
                    index=j,
                )
            L[j, j] = np.sqrt(d)
            L[j + 1:k1, j] /= L[j, j]
            L[j + 1:k1, j + 1:k1] -= np.outer(L[j + 1:k1, j], L[j + 1:k1, j])
        if k1 < n:
            L11 = L[k0:k1, k0:k1]
            panel = L[k1:, k0:k1]
            for j in range(k1 - k0):
                panel[:, j] = (panel[:, j] - panel[:, :j] @ L11[j, :j]) / L11[j, j]
            L[k1:, k1:] -= panel @ panel.T
    return np.tril(L)


def _forward_extended(L, B, block: int = _BLOCK):
    X = np.array(B, dtype=LD, copy=True)
    n = L.shape[0]
    for k0 in range(0, n, block):
        k1 = min(k0 + block, n)
        if k0:
            X[k0:k1] -= L[k0:k1, :k0] @ X[:k0]
        for i in range(k0, k1):
            if i > k0:
                X[i] -= L[i, k0:i] @ X[k0:i]
            X[i] /= L[i, i]
    return X


def _backward_extended(L, B, block: int = _BLOCK):
    # solves L^T X = B
    X = np.array(B, dtype=LD, copy=True)
    n = L.shape[0]
    U = L.T
    for k1 in range(n, 0, -block):
        k0 = max(k1 - block, 0)
        if k1 < n:
            X[k0:k1] -= U[k0:k1, k1:] @ X[k1:]
        for i in range(k1 - 1, k0 - 1, -1):
            if i < k1 - 1:
                X[i] -= U[i, i + 1:k1] @ X[i + 1:k1]
            X[i] /= U[i, i]
    return X


class Factorization:
    """Cholesky factor of a kernel matrix together with the matrix itself.

    ``matrix`` and ``lower`` share one dtype: float64 for ``precision ==
    "double"`` and longdouble for ``"extended"``.
    """

    def __init__(self, matrix, lower, precision, jitter_used=0.0):
        self.matrix = matrix
        self.lower = lower
        self.precision = precision
        self.jitter_used = float(jitter_used)
        self.pivots = np.diag(lower) ** 2

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def dtype(self):
        return self.matrix.dtype

    @property
    def smallest_pivot(self) -> float:
        return float(self.pivots.min())

    def forward(self, B):
        """``L^{-1} B``."""
        if self.precision == "extended":
            return _forward_extended(self.lower, B)
        return solve_triangular(self.lower, np.asarray(B, dtype=float), lower=True, check_finite=False)

    def solve(self, b):
        """``A^{-1} b`` in the factor's precision."""
        w = self.forward(b)
        if self.precision == "extended":
            return _backward_extended(self.lower, w)
        return solve_triangular(self.lower, w, lower=True, trans="T", check_finite=False)

    def quad(self, u, v=None):
        """``u^T A v`` accumulated in the factor's precision."""
        u = np.asarray(u, dtype=self.dtype)
        v = u if v is None else np.asarray(v, dtype=self.dtype)
        return u @ (self.matrix @ v)


def factorize(build_matrix, precision: str = "auto", jitter: bool = False,
              extended_max: int = EXTENDED_MAX_SIZE) -> Factorization:
    """Factor the SPD matrix produced by ``build_matrix(dtype)``.

    Parameters
    ----------
    build_matrix : callable
        ``build_matrix(dtype)`` returns the kernel matrix in that dtype.
    precision : {"auto", "double", "extended"}
        ``"auto"`` factors in double and refactors in extended precision when
        the smallest squared pivot drops below ``EXTENDED_PIVOT_THRESHOLD``
        and the size is at most ``extended_max``.
    jitter : bool
        Opt in to diagonal jitter on failure: ``1e-12 * n * max(diag)``,
        doubled until ``1e-8 * max(diag)``.
    """
    if precision not in ("auto", "double", "extended"):
        raise ValueError(f"unknown precision {precision!r}")
    if precision == "extended":
        return _with_jitter(build_matrix(LD), cholesky_extended, "extended", jitter)
    A = build_matrix(float)
    try:
        fac = _with_jitter(A, cholesky_double, "double", jitter)
    except ConditioningError:
        if precision == "auto" and A.shape[0] <= extended_max:
            return _with_jitter(build_matrix(LD), cholesky_extended, "extended", jitter)
        raise
    if (precision == "auto" and fac.jitter_used == 0.0
            and fac.smallest_pivot < EXTENDED_PIVOT_THRESHOLD
            and A.shape[0] <= extended_max):
        return _with_jitter(build_matrix(LD), cholesky_extended, "extended", jitter)
    return fac


def _with_jitter(A, chol, precision, jitter):
    try:
        return Factorization(A, chol(A), precision)
    except ConditioningError:
        if not jitter:
            raise
    n = A.shape[0]
    scale = float(np.max(np.diag(A)))
    delta = 1e-12 * n * scale
    last = None
    while delta <= 1e-8 * scale * (1 + 1e-12):
        B = A.copy()
        B[np.diag_indices(n)] += delta
        try:
            return Factorization(B, chol(B), precision, jitter_used=delta)
        except ConditioningError as exc:
            last = exc
            delta *= 2.0
    raise ConditioningError(
        f"factorization failed even with jitter up to 1e-8 * max diagonal ({last})",
        smallest_pivot=getattr(last, "smallest_pivot", None),
        size=n,
    )
