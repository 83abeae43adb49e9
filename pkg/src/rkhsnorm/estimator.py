"""
Norm traces and the two estimators built on them.

A :class:`NormTrace` records, for a sequence of point sets with shrinking
fill distance, the squared norm of each interpolant and (for nested sets)
the norm of the difference between consecutive interpolants.

* :func:`algorithm1` fits ``||s_X||^2 ~ c1 - c1' h^beta1`` and returns
  ``sqrt(c1)``, the extrapolated limit of the interpolant norms.
* :func:`algorithm2` fits the increments ``~ c2 h^beta2`` and replaces them
  by the fitted geometric series, giving an estimated upper bound
  ``sqrt(||s_0||^2 + sum_j c2^2 h_j^(2 beta2))``.

Both fit only the levels after the ``discard`` coarsest ones, which are
usually pre-asymptotic.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._linalg import ConditioningError
from .fitting import FitError, PowerLawFit, SaturatingFit, fit_growth, fit_powerlaw, fit_saturating
from .geometry import NestedSchedule, PointSet
from .interpolation import INCREMENT_RTOL, increment_between, interpolate
from .kernel import KernelSpec

logger = logging.getLogger(__name__)

__all__ = [
    "NormTrace",
    "EstimateReport",
    "MembershipResult",
    "NoDecayError",
    "build_trace",
    "algorithm1",
    "algorithm2",
    "detect_membership",
    "CONVERGING",
    "DIVERGING",
    "INCONCLUSIVE",
]

CONVERGING = "converging"
DIVERGING = "diverging"
INCONCLUSIVE = "inconclusive"

DEFAULT_DISCARD = 2
# relative size below which norms are constant / increments are zero
EXACT_RTOL = 1e-8
_GROWTH_RANGE = (0.01, 4.0)


class NoDecayError(FitError):
    """Increments do not decay; the target may lie outside the native space."""


@dataclass
class NormTrace:
    """Per-level ``(h, ||s||^2, ||s_l - s_{l-1}||)`` records.

    ``increment_norm[0]`` is NaN; later entries are NaN when increments were
    not computed.
    """

    fill_distance: np.ndarray
    norm_squared: np.ndarray
    increment_norm: np.ndarray | None = None
    nested: bool = False
    spec: KernelSpec | None = None
    dim: int = 1
    sizes: np.ndarray | None = None
    notes: list = field(default_factory=list)

    def __post_init__(self):
        self.fill_distance = np.asarray(self.fill_distance, dtype=float).reshape(-1)
        self.norm_squared = np.asarray(self.norm_squared, dtype=float).reshape(-1)
        n = self.fill_distance.size
        if self.norm_squared.size != n:
            raise ValueError("fill_distance and norm_squared differ in length")
        if self.increment_norm is None:
            self.increment_norm = np.full(n, np.nan)
        else:
            self.increment_norm = np.asarray(self.increment_norm, dtype=float).reshape(-1)
            if self.increment_norm.size == n - 1:
                self.increment_norm = np.concatenate([[np.nan], self.increment_norm])
            if self.increment_norm.size != n:
                raise ValueError("increment_norm must have one entry per level (or per level after the first)")
        if n and np.any(np.diff(self.fill_distance) >= 0):
            raise ValueError("fill distances must be strictly decreasing")
        self._check()

    def _check(self):
        y = self.norm_squared
        slack = 1e-9 * max(1.0, float(np.max(np.abs(y)))) if y.size else 0.0
        drops = np.flatnonzero(np.diff(y) < -slack)
        if drops.size:
            self.notes.append(f"squared norms decrease after level(s) {drops.tolist()}")
        if self.nested and self.has_increments:
            d = np.diff(y)
            inc2 = self.increment_norm[1:] ** 2
            bad = np.flatnonzero(np.abs(d - inc2) > INCREMENT_RTOL * np.maximum(y[1:], 1e-300))
            if bad.size:
                self.notes.append(
                    "orthogonality cross-check failed at level(s) "
                    f"{(bad + 1).tolist()} (conditioning indicator)"
                )

    def __len__(self) -> int:
        return self.fill_distance.size

    @property
    def has_increments(self) -> bool:
        return len(self) > 1 and bool(np.all(np.isfinite(self.increment_norm[1:])))

    def truncated(self, levels: int) -> "NormTrace":
        """First ``levels`` levels."""
        return NormTrace(
            self.fill_distance[:levels],
            self.norm_squared[:levels],
            self.increment_norm[:levels],
            nested=self.nested,
            spec=self.spec,
            dim=self.dim,
            sizes=None if self.sizes is None else self.sizes[:levels],
        )

    def to_csv(self, path=None, header_lines=()) -> str:
        """CSV with columns ``level,n_points,fill_distance,norm_squared,increment_norm``.

        Floats use 17 significant digits so a re-read trace is bit-identical.
        Lines in ``header_lines`` are written first, each prefixed by ``#``.
        """
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        meta = {"nested": self.nested, "dim": self.dim,
                "spec": None if self.spec is None else self.spec.to_dict()}
        buf.write(f"# trace {json.dumps(meta, sort_keys=True)}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["level", "n_points", "fill_distance", "norm_squared", "increment_norm"])
        for i in range(len(self)):
            inc = self.increment_norm[i]
            writer.writerow([
                i,
                "" if self.sizes is None else int(self.sizes[i]),
                f"{self.fill_distance[i]:.17g}",
                f"{self.norm_squared[i]:.17g}",
                "" if not np.isfinite(inc) else f"{inc:.17g}",
            ])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path_or_text) -> "NormTrace":
        text = _read_text(path_or_text)
        meta = {}
        rows = []
        for line in text.splitlines():
            if line.startswith("# trace "):
                meta = json.loads(line[len("# trace "):])
            elif line.startswith("#") or not line.strip():
                continue
            else:
                rows.append(line)
        reader = csv.DictReader(rows)
        h, n2, inc, sizes = [], [], [], []
        for r in reader:
            h.append(float(r["fill_distance"]))
            n2.append(float(r["norm_squared"]))
            inc.append(float(r["increment_norm"]) if r.get("increment_norm") else np.nan)
            sizes.append(int(r["n_points"]) if r.get("n_points") else -1)
        spec = KernelSpec.from_dict(meta["spec"]) if meta.get("spec") else None
        return cls(
            np.array(h), np.array(n2), np.array(inc),
            nested=bool(meta.get("nested", False)),
            spec=spec,
            dim=int(meta.get("dim", 1)),
            sizes=None if any(s < 0 for s in sizes) else np.array(sizes),
        )


def _read_text(path_or_text) -> str:
    if isinstance(path_or_text, str) and "\n" in path_or_text:
        return path_or_text
    with open(path_or_text) as fh:
        return fh.read()


@dataclass
class MembershipResult:
    classification: str
    saturating_rms: float
    growth_rms: float
    detail: str = ""

    def __str__(self) -> str:
        return self.classification

    def __eq__(self, other):
        if isinstance(other, str):
            return self.classification == other
        return NotImplemented

    def to_dict(self) -> dict:
        return {
            "classification": self.classification,
            "saturating_rms": self.saturating_rms,
            "growth_rms": self.growth_rms,
            "detail": self.detail,
        }


@dataclass
class EstimateReport:
    algorithm: int
    norm_estimate: float
    norm_squared_estimate: float
    fit: SaturatingFit | PowerLawFit | None
    tail_sum: float | None = None
    rho_used: float | None = None
    exact: bool = False
    levels_used: tuple = ()
    membership: MembershipResult | None = None
    diagnostics: list = field(default_factory=list)

    @property
    def beta(self) -> float | None:
        if isinstance(self.fit, SaturatingFit):
            return self.fit.beta1
        if isinstance(self.fit, PowerLawFit):
            return self.fit.beta2
        return None

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "norm_estimate": self.norm_estimate,
            "norm_squared_estimate": self.norm_squared_estimate,
            "fit": None if self.fit is None else self.fit.to_dict(),
            "tail_sum": self.tail_sum,
            "rho_used": self.rho_used,
            "exact": self.exact,
            "levels_used": list(self.levels_used),
            "membership": None if self.membership is None else self.membership.to_dict(),
            "diagnostics": list(self.diagnostics),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _level_values(f, level: int, X: PointSet) -> np.ndarray:
    if callable(f):
        vals = np.asarray(f(X.points), dtype=float).reshape(-1)
    else:
        vals = np.asarray(f[level], dtype=float).reshape(-1)
    if vals.size != len(X):
        raise ValueError(f"level {level}: got {vals.size} values for {len(X)} points")
    return vals


def build_trace(spec: KernelSpec, schedule, f, increments: bool | None = None,
                precision: str = "auto", jitter: bool = False) -> NormTrace:
    """Interpolate ``f`` on every level and record the norm trace.

    Parameters
    ----------
    spec : KernelSpec
    schedule : NestedSchedule or sequence of PointSet
    f : callable or sequence of arrays
        ``f(points)`` with ``points`` of shape ``(n, d)``, or tabulated values
        per level aligned with the schedule's points.
    increments : bool, optional
        Compute increment norms; defaults to True for nested schedules.

    A conditioning failure truncates the trace to the completed levels with
    a warning instead of discarding it.
    """
    levels = list(schedule)
    nested = isinstance(schedule, NestedSchedule) or all(
        levels[i].issubset(levels[i + 1]) for i in range(len(levels) - 1))
    if increments is None:
        increments = nested
    if increments and not nested:
        raise ValueError("increment norms need a nested schedule")
    h, n2, inc, sizes, notes = [], [], [], [], []
    prev = None
    for level, X in enumerate(levels):
        vals = _level_values(f, level, X)
        try:
            s = interpolate(spec, X, vals, jitter=jitter, precision=precision)
        except ConditioningError as exc:
            msg = f"level {level} ({len(X)} points): {exc}; trace truncated to {level} levels"
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
            notes.append(msg)
            break
        notes.extend(f"level {level}: {n}" for n in s.diagnostics.notes)
        h.append(X.fill_distance)
        n2.append(s.norm_squared)
        sizes.append(len(X))
        if increments and prev is not None:
            value, disc = increment_between(prev, s)
            if disc > INCREMENT_RTOL and value > 1e-6 * s.norm:
                notes.append(f"level {level}: increment cross-check differs by {disc:.2e}")
            inc.append(value)
        else:
            inc.append(np.nan)
        prev = s
    trace = NormTrace(
        np.array(h), np.array(n2), np.array(inc),
        nested=nested and bool(increments), spec=spec, dim=levels[0].dim,
        sizes=np.array(sizes),
    )
    trace.notes[:0] = notes
    return trace


def _window(n: int, discard: int, minimum: int) -> int:
    """First index of the fit window: ``discard`` unless that leaves too few points."""
    return max(0, min(int(discard), n - minimum))


def _default_beta_max(trace: NormTrace) -> float:
    if trace.spec is None:
        return 6.0
    return 2.0 * trace.spec.smoothness(trace.dim)


def algorithm1(trace: NormTrace, discard: int = DEFAULT_DISCARD, beta_max: float | None = None,
               space: str = "linear", membership: bool = True) -> EstimateReport:
    """Norm estimate ``sqrt(c1)`` from the asymptote of the squared interpolant norms."""
    n = len(trace)
    if n < 4:
        raise FitError(f"algorithm 1 needs at least 4 levels, got {n}")
    start = _window(n, discard, 4)
    h = trace.fill_distance[start:]
    y = trace.norm_squared[start:]
    diag = list(trace.notes)
    if start != discard:
        diag.append(f"only {n} levels; fitting from level {start} instead of {discard}")
    ymax = float(np.max(y))
    if ymax - float(np.min(y)) <= EXACT_RTOL * max(ymax, 1e-300):
        diag.append("squared norms are constant: target captured exactly, no extrapolation")
        report = EstimateReport(1, math.sqrt(ymax), ymax, None, exact=True,
                                levels_used=tuple(range(start, n)), diagnostics=diag)
    else:
        bmax = _default_beta_max(trace) if beta_max is None else float(beta_max)
        fit = fit_saturating(h, y, beta_range=(0.05, bmax), space=space)
        if fit.constrained:
            diag.append("asymptote constrained to the largest computed squared norm")
        if fit.beta1 > bmax * 0.999:
            diag.append(f"beta1 at the search ceiling {bmax:g}")
        report = EstimateReport(1, math.sqrt(fit.c1), fit.c1, fit,
                                levels_used=tuple(range(start, n)), diagnostics=diag)
    if membership:
        _attach_membership(report, trace)
    return report


def _increment_pairs(trace: NormTrace, pairing: str):
    # increment between levels i and i+1 lives at increment_norm[i + 1]
    inc = trace.increment_norm[1:]
    if pairing == "coarse":
        h = trace.fill_distance[:-1]
    elif pairing == "fine":
        h = trace.fill_distance[1:]
    else:
        raise ValueError(f"pairing must be 'coarse' or 'fine', got {pairing!r}")
    return h, inc


def algorithm2(trace: NormTrace, discard: int = DEFAULT_DISCARD, pairing: str = "coarse",
               envelope: bool = True, anchor: str = "first",
               membership: bool = True) -> EstimateReport:
    """Upper-bound estimate from the power-law decay of the increments.

    The increment between levels ``i`` and ``i+1`` is paired with ``h_i``
    (``pairing="coarse"``) or ``h_{i+1}`` (``"fine"``). With the fitted
    ``c2 h^beta2`` and the observed geometric fill-distance ratio ``rho``,
    increments are summed in closed form::

        tail = (c2 * a**beta2)**2 / (1 - rho**(2 * beta2))

    ``anchor="first"`` adds the tail to the squared norm of the first
    window level and starts it at ``a = h_start``, so every increment from
    there on, computed or not, is replaced by the fitted curve.
    ``anchor="last"`` adds it to the finest squared norm and starts at the
    first uncomputed increment (``a = h_{n-2} * rho`` for coarse pairing,
    ``h_{n-1} * rho`` for fine). The first form is the more conservative
    one whenever the fitted curve lies above the data (``envelope=True``).
    """
    n = len(trace)
    if n < 4:
        raise FitError(f"algorithm 2 needs at least 4 levels, got {n}")
    if not trace.has_increments:
        raise FitError("algorithm 2 needs increment norms for every level after the first")
    diag = list(trace.notes)
    if not trace.nested:
        diag.append("trace is not nested; the orthogonality argument behind the tail sum does not apply")
    last_sq = float(trace.norm_squared[-1])
    last = math.sqrt(max(last_sq, 0.0))
    h_pairs, inc = _increment_pairs(trace, pairing)
    start = _window(inc.size, discard, 3)
    if start != discard:
        diag.append(f"only {n} levels; fitting increments from level {start} instead of {discard}")
    zero = inc <= EXACT_RTOL * max(last, 1e-300)
    if zero[-1]:
        diag.append("finest increment vanishes: target captured exactly, tail is zero")
        report = EstimateReport(2, last, last_sq, None, tail_sum=0.0, exact=True,
                                levels_used=tuple(range(start, n)), diagnostics=diag)
        if membership:
            _attach_membership(report, trace)
        return report
    keep = np.arange(inc.size) >= start
    if np.any(zero & keep):
        diag.append(f"dropped zero increments at level(s) {(np.flatnonzero(zero & keep) + 1).tolist()}")
        keep &= ~zero
    fit = fit_powerlaw(h_pairs[keep], inc[keep], envelope=envelope)
    if fit.beta2 <= 0:
        raise NoDecayError(
            f"no decay observed (beta2 = {fit.beta2:.3g}): f may lie outside the RKHS, "
            "interpolant norms would grow without bound"
        )
    ratios = trace.fill_distance[start + 1:] / trace.fill_distance[start:-1]
    rho = float(np.exp(np.mean(np.log(ratios))))
    if not 0 < rho < 1:
        raise FitError(f"fill distances do not decay geometrically (rho = {rho:.3g})")
    if anchor == "first":
        a = trace.fill_distance[start]
        base_sq = float(trace.norm_squared[start])
    elif anchor == "last":
        a = (trace.fill_distance[-2] if pairing == "coarse" else trace.fill_distance[-1]) * rho
        base_sq = last_sq
    else:
        raise ValueError(f"anchor must be 'first' or 'last', got {anchor!r}")
    q = rho ** (2.0 * fit.beta2)
    tail = (fit.c2 * a**fit.beta2) ** 2 / (1.0 - q)
    est_sq = base_sq + tail
    if est_sq < last_sq:
        diag.append("fitted tail undercuts the finest computed norm; estimate raised to it")
        est_sq = last_sq
    report = EstimateReport(2, math.sqrt(est_sq), est_sq, fit, tail_sum=float(tail), rho_used=rho,
                            levels_used=tuple(range(start, n)), diagnostics=diag)
    if membership:
        _attach_membership(report, trace)
    return report


def _attach_membership(report: EstimateReport, trace: NormTrace):
    if report.exact:
        report.membership = MembershipResult(CONVERGING, 0.0, float("nan"), "exact capture")
        return
    m = detect_membership(trace)
    report.membership = m
    if m.classification == DIVERGING:
        msg = ("WARNING: interpolant norms grow without bound; f is likely outside the RKHS "
               "and this estimate is meaningless")
        report.diagnostics.insert(0, msg)
        logger.warning(msg)


def detect_membership(trace: NormTrace, ratio: float = 10.0,
                      discard: int = DEFAULT_DISCARD) -> MembershipResult:
    """Classify the squared-norm trace as converging, diverging or inconclusive.

    Fits the saturating model ``c1 - c1' h^beta`` and the unbounded model
    ``a + b h^(-gamma)`` to the levels after the first ``discard`` (as many
    as needed are kept to leave four). One model wins when its RMS residual
    is ``ratio`` times smaller than the other's. A growth fit pinned at its
    slowest admissible rate also counts as converging, as long as the
    saturating model fits better.
    """
    n = len(trace)
    if n < 4:
        return MembershipResult(INCONCLUSIVE, float("nan"), float("nan"), "fewer than 4 levels")
    start = _window(n, discard, 4)
    h = trace.fill_distance[start:]
    y = trace.norm_squared[start:]
    ymax = float(np.max(y))
    if ymax - float(np.min(y)) <= EXACT_RTOL * max(ymax, 1e-300):
        return MembershipResult(CONVERGING, 0.0, float("nan"), "constant norms")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        try:
            sat = fit_saturating(h, y, beta_range=(0.05, 8.0)).residual_rms
        except FitError:
            sat = float("inf")
        try:
            growth = fit_growth(h, y, gamma_range=_GROWTH_RANGE)
            grow, gamma = growth.residual_rms, growth.gamma
        except FitError:
            grow, gamma = float("inf"), float("nan")
    floor = 1e-12 * ymax
    s, g = max(sat, floor), max(grow, floor)
    if g * ratio <= s:
        cls, detail = DIVERGING, f"unbounded growth model fits markedly better (gamma = {gamma:.3g})"
    elif s * ratio <= g:
        cls, detail = CONVERGING, "saturating model fits markedly better"
    elif s < g and gamma <= _GROWTH_RANGE[0] * 1.01:
        cls, detail = CONVERGING, "growth fit collapses to its slowest rate"
    else:
        cls, detail = INCONCLUSIVE, "neither model is clearly preferred"
    return MembershipResult(cls, float(sat), float(grow), detail)
