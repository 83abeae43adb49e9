"""
Point sets on axis-aligned boxes and the geometric quantities that drive
kernel interpolation: fill distance, separation distance and the
uniformity constant. Also builds the nested dyadic grids used by the
upper-bound estimator and the non-nested quasi-uniform grids used by the
asymptote fit.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

__all__ = [
    "BoxDomain",
    "PointSet",
    "NestedSchedule",
    "GeometryError",
    "fill_distance",
    "separation_distance",
    "uniformity",
    "equispaced_grid",
    "make_dyadic_schedule",
    "make_quasi_uniform_schedule",
    "write_points_csv",
    "read_points_csv",
    "DEFAULT_MAX_POINTS",
]

# total point cap for generated grids; 65**2 keeps 2D schedules dense-solvable
DEFAULT_MAX_POINTS = 65**2

# candidate grid refinement factor for the brute-force fill distance
_FILL_REFINEMENT = 10
_MAX_CANDIDATES = 4_000_000


class GeometryError(ValueError):
    """Raised for invalid domains, point sets or schedules."""


@dataclass(frozen=True)
class BoxDomain:
    """Closed axis-aligned box ``[lo_1, hi_1] x ... x [lo_d, hi_d]``."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        if len(lo) == 0 or len(lo) != len(hi):
            raise GeometryError(f"lo and hi must have equal positive length, got {lo} and {hi}")
        if any(not (a < b) for a, b in zip(lo, hi)):
            raise GeometryError(f"lo must be strictly below hi componentwise, got {lo} and {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def interval(cls, a: float, b: float) -> "BoxDomain":
        return cls((a,), (b,))

    @classmethod
    def cube(cls, a: float, b: float, dim: int) -> "BoxDomain":
        return cls((a,) * dim, (b,) * dim)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def lengths(self) -> np.ndarray:
        return np.asarray(self.hi) - np.asarray(self.lo)

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        points = np.atleast_2d(points)
        lo = np.asarray(self.lo) - tol
        hi = np.asarray(self.hi) + tol
        return np.all((points >= lo) & (points <= hi), axis=1)

    def grid(self, per_dim) -> np.ndarray:
        """Tensor grid with endpoints included, shape ``(prod(per_dim), d)``."""
        per_dim = np.broadcast_to(np.asarray(per_dim, dtype=int), (self.dim,))
        axes = [np.linspace(a, b, int(n)) for a, b, n in zip(self.lo, self.hi, per_dim)]
        return _tensor(axes)

    def to_dict(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi)}


def _tensor(axes) -> np.ndarray:
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def _as_points(points) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise GeometryError(f"points must be an (n, d) array, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class PointSet:
    """Ordered, pairwise-distinct points inside a box.

    Geometry (fill and separation distance) is computed lazily and cached.
    ``points`` is stored as a read-only ``(n, d)`` array.
    """

    points: np.ndarray
    domain: BoxDomain
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        pts = _as_points(self.points).copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if not self.validate:
            return
        if pts.shape[0] == 0:
            raise GeometryError("point set is empty")
        if pts.shape[1] != self.domain.dim:
            raise GeometryError(
                f"points have dimension {pts.shape[1]}, domain has dimension {self.domain.dim}"
            )
        if not np.all(np.isfinite(pts)):
            raise GeometryError("points must be finite")
        inside = self.domain.contains(pts)
        if not inside.all():
            bad = int(np.flatnonzero(~inside)[0])
            raise GeometryError(f"point {pts[bad].tolist()} (index {bad}) lies outside the domain")
        if pts.shape[0] > 1 and len(np.unique(pts, axis=0)) != pts.shape[0]:
            raise GeometryError("points are not pairwise distinct")

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @cached_property
    def fill_distance(self) -> float:
        return fill_distance(self)

    @cached_property
    def separation_distance(self) -> float:
        return separation_distance(self)

    @cached_property
    def uniformity(self) -> float:
        return self.fill_distance / self.separation_distance

    def index_in(self, other: "PointSet") -> np.ndarray:
        """Row indices of ``self.points`` inside ``other.points`` (exact match).

        Raises :class:`GeometryError` if some point of ``self`` is missing.
        """
        lookup = {tuple(p): i for i, p in enumerate(other.points.tolist())}
        idx = np.empty(len(self), dtype=int)
        for i, p in enumerate(self.points.tolist()):
            j = lookup.get(tuple(p))
            if j is None:
                raise GeometryError(f"point {p} of the coarse set is missing from the fine set")
            idx[i] = j
        return idx

    def issubset(self, other: "PointSet") -> bool:
        try:
            self.index_in(other)
        except GeometryError:
            return False
        return True

    def with_points(self, extra) -> "PointSet":
        """New point set with ``extra`` appended."""
        return PointSet(np.vstack([self.points, _as_points(extra)]), self.domain)


def _exact_fill_1d(x: np.ndarray, a: float, b: float) -> float:
    x = np.sort(x)
    gaps = np.diff(x) / 2.0
    ends = [x[0] - a, b - x[-1]]
    return float(max(ends + ([gaps.max()] if gaps.size else [])))


def _candidate_axes(X: PointSet):
    axes = []
    for i, (a, b) in enumerate(zip(X.domain.lo, X.domain.hi)):
        distinct = max(len(np.unique(X.points[:, i])), 2)
        axes.append(np.linspace(a, b, _FILL_REFINEMENT * (distinct - 1) + 1))
    return axes


def fill_distance(X: PointSet, method: str = "auto") -> float:
    """Largest distance from any domain point to its nearest point of ``X``.

    Parameters
    ----------
    X : PointSet
    method : {"auto", "grid", "exact"}
        ``"grid"`` maximises the nearest-point distance over a candidate
        tensor grid that is ten times finer per axis than the distinct
        coordinates of ``X``; ``"exact"`` is available in one dimension
        (half the largest gap, or the distance to an uncovered endpoint).
        ``"auto"`` picks ``"exact"`` in 1D and ``"grid"`` otherwise.
    """
    if len(X) == 0:
        raise GeometryError("fill distance of an empty point set is undefined")
    if method == "auto":
        method = "exact" if X.dim == 1 else "grid"
    if method == "exact":
        if X.dim != 1:
            raise GeometryError("exact fill distance is only implemented in one dimension")
        return _exact_fill_1d(X.points[:, 0], X.domain.lo[0], X.domain.hi[0])
    if method != "grid":
        raise ValueError(f"unknown method {method!r}")
    axes = _candidate_axes(X)
    total = math.prod(len(ax) for ax in axes)
    if total > _MAX_CANDIDATES:
        raise GeometryError(
            f"fill distance candidate grid would have {total} points (cap {_MAX_CANDIDATES})"
        )
    dist, _ = cKDTree(X.points).query(_tensor(axes))
    return float(dist.max())


def separation_distance(X: PointSet) -> float:
    """Smallest Euclidean distance between two distinct points of ``X``."""
    if len(X) < 2:
        raise GeometryError("separation distance needs at least two points")
    dist, _ = cKDTree(X.points).query(X.points, k=2)
    return float(dist[:, 1].min())


def uniformity(X: PointSet) -> float:
    """Ratio of fill distance to separation distance.

    This is the raw ratio; equispaced 1D grids give 1/2.
    """
    if len(X) < 2:
        raise GeometryError("uniformity needs at least two points")
    return X.fill_distance / X.separation_distance


def equispaced_grid(domain: BoxDomain, per_dim) -> PointSet:
    return PointSet(domain.grid(per_dim), domain)


@dataclass(frozen=True)
class NestedSchedule:
    """Sequence of nested point sets with geometrically shrinking fill distance."""

    levels: tuple
    decay_ratio: float

    def __post_init__(self):
        levels = tuple(self.levels)
        object.__setattr__(self, "levels", levels)
        if len(levels) < 1:
            raise GeometryError("schedule has no levels")
        if not 0.0 < self.decay_ratio < 1.0:
            raise GeometryError(f"decay ratio must lie in (0, 1), got {self.decay_ratio}")
        for i in range(len(levels) - 1):
            coarse, fine = levels[i], levels[i + 1]
            if not coarse.issubset(fine):
                raise GeometryError(f"level {i} is not contained in level {i + 1}")
            h0, h1 = coarse.fill_distance, fine.fill_distance
            if not h1 < h0:
                raise GeometryError(f"fill distance does not decrease from level {i} to {i + 1}")
            if h1 / h0 > self.decay_ratio + 0.05:
                raise GeometryError(
                    f"fill distance ratio {h1 / h0:.4f} at level {i + 1} exceeds "
                    f"decay ratio {self.decay_ratio} + 0.05"
                )

    def __len__(self) -> int:
        return len(self.levels)

    def __getitem__(self, i):
        return self.levels[i]

    def __iter__(self):
        return iter(self.levels)

    @property
    def fill_distances(self) -> np.ndarray:
        return np.array([X.fill_distance for X in self.levels])


def make_dyadic_schedule(
    domain: BoxDomain,
    base_per_dim: int,
    num_levels: int,
    max_points: int = DEFAULT_MAX_POINTS,
    endpoints: bool = True,
) -> NestedSchedule:
    """Nested tensor grids with ``2**l * (base - 1) + 1`` points per axis.

    Coarse levels are strided subsets of the finest grid, so nestedness
    holds bit-for-bit. With ``endpoints=False`` the boundary nodes of every
    axis are dropped (``2**l * (base - 1) - 1`` points per axis); the fill
    distance is then the grid spacing, attained at the boundary.
    """
    if base_per_dim < 2:
        raise GeometryError(f"base_per_dim must be >= 2, got {base_per_dim}")
    if num_levels < 2:
        raise GeometryError(f"num_levels must be >= 2, got {num_levels}")
    finest = 2 ** (num_levels - 1) * (base_per_dim - 1) + 1
    if not endpoints and base_per_dim < 3:
        raise GeometryError("interior grids need base_per_dim >= 3")
    total = (finest if endpoints else finest - 2) ** domain.dim
    if total > max_points:
        raise GeometryError(
            f"finest level would have {total} points, above the cap max_points={max_points}"
        )
    axes = [np.linspace(a, b, finest) for a, b in zip(domain.lo, domain.hi)]
    levels = []
    for level in range(num_levels):
        stride = 2 ** (num_levels - 1 - level)
        sub = [ax[::stride] if endpoints else ax[::stride][1:-1] for ax in axes]
        levels.append(PointSet(_tensor(sub), domain))
    return NestedSchedule(tuple(levels), 0.5)


def make_quasi_uniform_schedule(
    domain: BoxDomain,
    fill_targets,
    max_points: int = DEFAULT_MAX_POINTS,
) -> list:
    """Coarsest equispaced grid meeting each fill-distance target.

    Grids use a common spacing on every axis, so a tensor grid with spacing
    ``s`` has fill distance ``s * sqrt(d) / 2`` (up to rounding of the
    per-axis counts). The schedule is generally not nested.
    """
    targets = np.asarray(fill_targets, dtype=float)
    if targets.ndim != 1 or targets.size == 0:
        raise GeometryError("fill_targets must be a nonempty list")
    if np.any(targets <= 0) or np.any(np.diff(targets) >= 0):
        raise GeometryError("fill_targets must be positive and strictly decreasing")
    lengths = domain.lengths
    out = []
    for h in targets:
        spacing = 2.0 * h / math.sqrt(domain.dim)
        # 1e-9 slack so exact targets like 1/6 are not pushed to the next count
        per_dim = np.ceil(lengths / spacing - 1e-9).astype(int) + 1
        per_dim = np.maximum(per_dim, 2)
        total = int(np.prod(per_dim))
        if total > max_points:
            raise GeometryError(
                f"fill target {h:g} needs {total} points, above the cap max_points={max_points}"
            )
        out.append(equispaced_grid(domain, per_dim))
    return out


def write_points_csv(path, X: PointSet) -> None:
    """One point per row, d columns, 17 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i + 1}" for i in range(X.dim)])
        for p in X.points:
            writer.writerow([f"{v:.17g}" for v in p])


def read_points_csv(path, domain: BoxDomain | None = None) -> PointSet:
    rows = Path(path).read_text().splitlines()
    data = np.array([[float(v) for v in r.split(",")] for r in rows[1:] if r.strip()])
    data = _as_points(data)
    if domain is None:
        domain = BoxDomain(tuple(data.min(axis=0)), tuple(data.max(axis=0)))
    return PointSet(data, domain)
