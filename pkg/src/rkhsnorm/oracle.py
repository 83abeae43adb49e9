"""
Reference norms to check the estimators against.

For the order-0 Matern kernel ``exp(-eps |x - z|)`` on an interval the
native space is H^1 with the norm

    ||f||^2 = (1 / (2 eps)) * int_a^b (f'^2 + eps^2 f^2) dx + (f(a)^2 + f(b)^2) / 2,

which :func:`exp_kernel_norm` evaluates by composite Gauss-Legendre
quadrature. For every other kernel the reference is the interpolant norm
on one dense grid (:func:`dense_reference_norm`), a lower bound on the
true norm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .geometry import BoxDomain, make_dyadic_schedule
from .interpolation import interpolate
from .kernel import KernelSpec

__all__ = [
    "QuadratureRule",
    "gauss_legendre",
    "composite_rule",
    "exp_kernel_norm",
    "dense_reference_norm",
    "DenseReference",
]


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    a: float
    b: float
    order: int

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")

    def integrate(self, g) -> float:
        return float(np.dot(self.weights, g(self.nodes)))


def gauss_legendre(a: float, b: float, order: int) -> QuadratureRule:
    """``order``-point Gauss-Legendre rule mapped to ``[a, b]``."""
    if order < 1:
        raise ValueError("order must be positive")
    t, w = leggauss(order)
    half = 0.5 * (b - a)
    return QuadratureRule(0.5 * (a + b) + half * t, half * w, float(a), float(b), order)


def composite_rule(a: float, b: float, quad_points: int, breaks=(), panels: int = 16,
                   order: int | None = None) -> QuadratureRule:
    """Gauss-Legendre on equal panels of each smooth piece between ``breaks``.

    Panels never straddle a break point. ``quad_points`` is the total
    budget, split evenly between ``panels`` panels per piece unless
    ``order`` is given.
    """
    cuts = sorted({float(a), float(b), *(float(k) for k in breaks if a < k < b)})
    pieces = list(zip(cuts[:-1], cuts[1:]))
    if order is None:
        order = max(2, quad_points // (panels * len(pieces)))
    nodes, weights = [], []
    for lo, hi in pieces:
        edges = np.linspace(lo, hi, panels + 1)
        for p0, p1 in zip(edges[:-1], edges[1:]):
            r = gauss_legendre(p0, p1, order)
            nodes.append(r.nodes)
            weights.append(r.weights)
    return QuadratureRule(np.concatenate(nodes), np.concatenate(weights), float(a), float(b),
                          order)


def exp_kernel_norm(f, df, a: float, b: float, eps: float = 1.0, quad_points: int = 2048,
                    kinks=()) -> float:
    """Native-space norm of ``f`` for ``k(x, z) = exp(-eps |x - z|)`` on ``[a, b]``.

    Parameters
    ----------
    f, df : callable
        Vectorized function and derivative on ``[a, b]``; ``df`` may be
        undefined at the ``kinks``.
    eps : float
        Shape parameter.
    quad_points : int
        Total number of quadrature nodes.
    kinks : sequence of float
        Points where ``f`` is only continuous; no panel straddles them.
    """
    if df is None:
        raise ValueError("exp_kernel_norm needs the derivative of f")
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if not a < b:
        raise ValueError("need a < b")
    rule = composite_rule(a, b, quad_points, breaks=kinks)
    x = rule.nodes
    fx = np.asarray(f(x), dtype=float)
    dfx = np.asarray(df(x), dtype=float)
    interior = float(np.dot(rule.weights, dfx**2 + eps**2 * fx**2)) / (2.0 * eps)
    ends = 0.5 * (float(f(np.array([a]))[0]) ** 2 + float(f(np.array([b]))[0]) ** 2)
    return math.sqrt(interior + ends)


@dataclass
class DenseReference:
    norm: float
    norm_half: float
    points: int
    points_half: int

    @property
    def gap(self) -> float:
        """Relative increase from half to full resolution."""
        return (self.norm - self.norm_half) / self.norm if self.norm > 0 else 0.0

    def to_dict(self) -> dict:
        return {"norm": self.norm, "norm_half": self.norm_half, "points": self.points,
                "points_half": self.points_half, "gap": self.gap}


def dense_reference_norm(spec: KernelSpec, f, domain: BoxDomain, per_dim: int,
                         endpoints: bool = True, precision: str = "auto",
                         full_output: bool = False):
    """Interpolant norm on one dense tensor grid: a lower bound on ``||f||``.

    The norm at half resolution (every other grid line) is computed too, so
    the remaining gap is visible. ``per_dim`` counts grid points per axis
    including the endpoints; with ``endpoints=False`` those two are dropped.

    Returns the norm, or a :class:`DenseReference` when ``full_output``.
    """
    if per_dim < 3 or per_dim % 2 == 0:
        raise ValueError("per_dim must be odd and at least 3 so the half grid nests")
    sched = make_dyadic_schedule(domain, (per_dim - 1) // 2 + 1, 2,
                                 max_points=per_dim**domain.dim, endpoints=endpoints)
    out = []
    for X in sched:
        s = interpolate(spec, X, np.asarray(f(X.points), dtype=float).reshape(-1),
                        precision=precision)
        out.append((s.norm, len(X)))
    ref = DenseReference(norm=out[1][0], norm_half=out[0][0], points=out[1][1],
                         points_half=out[0][1])
    return ref if full_output else ref.norm

