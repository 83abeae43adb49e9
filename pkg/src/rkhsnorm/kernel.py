"""
Matern kernels of half-integer smoothness written as polynomial times
exponential in ``t = shape * r``:

=====  =============================  ================
order  k(r)                           native space (d)
=====  =============================  ================
0      exp(-t)                        H^{(d+1)/2}
1      (1 + t) exp(-t)                H^{(d+3)/2}
2      (1 + t + t**2/3) exp(-t)       H^{(d+5)/2}
=====  =============================  ================

All members satisfy ``k(x, x) = 1``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .geometry import PointSet

__all__ = [
    "KernelSpec",
    "eval_kernel",
    "kernel_matrix",
    "cross_vector",
    "cross_matrix",
    "pairwise_distances",
]


@dataclass(frozen=True)
class KernelSpec:
    """A Matern family member of order 0, 1 or 2 with shape parameter ``shape``."""

    order: int = 0
    shape: float = 1.0

    def __post_init__(self):
        if self.order not in (0, 1, 2):
            raise ValueError(f"Matern order must be 0, 1 or 2, got {self.order}")
        if not (np.isfinite(self.shape) and self.shape > 0):
            raise ValueError(f"shape must be positive, got {self.shape}")
        object.__setattr__(self, "order", int(self.order))
        object.__setattr__(self, "shape", float(self.shape))

    def smoothness(self, dim: int) -> float:
        """Sobolev exponent tau of the native space in ``dim`` dimensions."""
        return self.order + (dim + 1) / 2.0

    def radial(self, r):
        """Kernel profile as a function of distance; dtype of ``r`` is kept."""
        t = self.shape * r
        if self.order == 0:
            poly = 1.0
        elif self.order == 1:
            poly = 1.0 + t
        else:
            poly = 1.0 + t + t * t / 3.0
        return poly * np.exp(-t)

    @property
    def label(self) -> str:
        return f"Matern {self.order}"

    def to_dict(self) -> dict:
        return {"family": "matern", "order": self.order, "shape": self.shape}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        if d.get("family", "matern") != "matern":
            raise ValueError(f"unsupported kernel family {d.get('family')!r}")
        return cls(order=int(d["order"]), shape=float(d["shape"]))

    @classmethod
    def from_json(cls, s: str) -> "KernelSpec":
        return cls.from_dict(json.loads(s))


def _point(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=float))


def eval_kernel(spec: KernelSpec, x, z) -> float:
    x, z = _point(x), _point(z)
    if x.shape != z.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {z.shape}")
    # sorted summation order makes k(x, z) == k(z, x) bit-for-bit
    sq = np.sort((x - z) ** 2)
    return float(spec.radial(np.sqrt(sq.sum())))


def pairwise_distances(A, B, dtype=float) -> np.ndarray:
    """Euclidean distances between rows of ``A`` (n, d) and ``B`` (m, d)."""
    A = np.asarray(A, dtype=dtype)
    B = np.asarray(B, dtype=dtype)
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    if A.shape[1] == 1:
        return np.abs(A[:, 0][:, None] - B[:, 0][None, :])
    diff = A[:, None, :] - B[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def kernel_matrix(spec: KernelSpec, X: PointSet, dtype=float) -> np.ndarray:
    """Dense matrix ``A[i, j] = k(x_i, x_j)``.

    Only the upper triangle is evaluated; the lower one is a mirror, so the
    result is exactly symmetric with unit diagonal. ``dtype=np.longdouble``
    evaluates the kernel in extended precision.
    """
    pts = np.asarray(X.points, dtype=dtype)
    n = pts.shape[0]
    A = np.empty((n, n), dtype=dtype)
    for start in range(0, n, 512):
        stop = min(start + 512, n)
        block = spec.radial(pairwise_distances(pts[start:stop], pts[start:], dtype=dtype))
        A[start:stop, start:] = block
    iu = np.triu_indices(n, 1)
    A[(iu[1], iu[0])] = A[iu]
    np.fill_diagonal(A, 1.0)
    return A


def cross_matrix(spec: KernelSpec, X: PointSet, Y, dtype=float) -> np.ndarray:
    """``K[i, j] = k(x_i, y_j)`` for centers ``X`` and evaluation points ``Y``."""
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None] if X.dim == 1 else Y[None, :]
    return spec.radial(pairwise_distances(X.points, Y, dtype=dtype))


def cross_vector(spec: KernelSpec, X: PointSet, x) -> np.ndarray:
    """Vector ``(k(x, x_i))_i`` of length ``len(X)``."""
    x = _point(x)
    if x.shape != (X.dim,):
        raise ValueError(f"dimension mismatch: point has shape {x.shape}, centers have dimension {X.dim}")
    return cross_matrix(spec, X, x[None, :])[:, 0]
