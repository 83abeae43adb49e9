"""
Command-line interface: ``rkhsnorm {tables,estimate,certify,trace}``.

Exit codes: 0 success, 1 failed checks or bound violations, 2 input
errors, 3 the target looks like it lies outside the native space.

Every file written carries the parsed configuration as ``#`` header lines
(a ``config`` key in JSON), so identical arguments give byte-identical
outputs. The output directory defaults to ``$RKHSNORM_OUT`` or
``./rkhsnorm-out``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .estimator import (
    DEFAULT_DISCARD,
    DIVERGING,
    NormTrace,
    algorithm1,
    algorithm2,
    build_trace,
    detect_membership,
)
from .fitting import FitError
from .geometry import GeometryError
from .kernel import KernelSpec
from .testbed import (
    CertificationRefused,
    ExperimentConfig,
    SampleFormatError,
    certify_from_samples,
    get_function,
    read_holdout_csv,
    read_samples_csv,
    registry,
    report_json,
    run_table_experiments,
    sample_function,
    verification_grid,
    write_holdout_csv,
    write_samples_csv,
)
from ._linalg import ConditioningError

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_DIVERGING = 0, 1, 2, 3
ENV_OUT = "RKHSNORM_OUT"
DEFAULT_OUT = "rkhsnorm-out"

# keys left out of the echoed config: they name where files go, not what is in them
_NOT_ECHOED = {"out", "func"}


class InputError(Exception):
    """Bad command-line input; maps to exit code 2."""


# --------------------------------------------------------------------------
# output helpers


def write_atomic(path: Path, text: str) -> Path:
    """Write ``text`` to a temporary sibling file and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def config_dict(args: argparse.Namespace) -> dict:
    d = {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_ECHOED}
    d["version"] = __version__
    return d


def header_lines(args: argparse.Namespace) -> list:
    return [f"rkhsnorm {args.command}", "config " + json.dumps(config_dict(args), sort_keys=True)]


def render_rows(columns, rows, fmt: str, headers=()) -> str:
    """Rows as comma-separated CSV or whitespace-separated gnuplot data."""
    buf = io.StringIO()
    for line in headers:
        buf.write(f"# {line}\n")
    if fmt == "gnuplot":
        buf.write("# " + " ".join(columns) + "\n")
        for row in rows:
            buf.write(" ".join(_cell(v) for v in row) + "\n")
    else:
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get(ENV_OUT) or DEFAULT_OUT)


def _spec(args) -> KernelSpec:
    try:
        return KernelSpec(args.kernel_order, args.shape)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _experiment_config(args, orders=None, functions=None) -> ExperimentConfig:
    cfg = ExperimentConfig(
        orders=tuple(orders if orders is not None else (args.kernel_order,)),
        shape=args.shape,
        functions=functions,
        endpoints=args.endpoints,
        max_points=args.max_points,
        max_level=getattr(args, "max_level", None),
        discard=args.discard,
        beta_max=args.beta_max,
        pairing=args.pairing,
        anchor=args.anchor,
        jitter=args.jitter,
    )
    if args.base is not None:
        cfg.base_1d = cfg.base_2d = args.base
    if args.levels is not None:
        cfg.levels_1d = cfg.levels_2d = args.levels
    return cfg


def _int_list(text: str) -> list:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _name_list(text: str) -> list:
    return [t.strip() for t in text.split(",") if t.strip()]


# --------------------------------------------------------------------------
# commands


def cmd_tables(args) -> int:
    """Run the table experiments and write tables, traces and failure list."""
    names = args.functions
    known = {tf.name for tf in registry()}
    if names:
        unknown = [n for n in names if n not in known]
        if unknown:
            raise InputError(f"unknown function(s) {unknown}; choose from {sorted(known)}")
    orders = args.kernels if args.kernels is not None else [args.kernel_order]
    try:
        kernels = [KernelSpec(o, args.shape) for o in orders]
    except ValueError as exc:
        raise InputError(str(exc)) from None
    cfg = _experiment_config(args, orders=orders, functions=tuple(names) if names else None)

    def progress(cell):
        if not args.quiet:
            print(f"  {cell.key:<10s} {cell.status:<9s} {cell.wall_time:6.2f} s", file=sys.stderr)

    if args.max_level is not None:
        print(f"advisory: levels capped at {args.max_level}; estimates from short traces are "
              "rough and the invariant checks may not hold", file=sys.stderr)
    result = run_table_experiments(kernels, cfg, progress=progress)

    out = _out_dir(args)
    head = header_lines(args)
    for c in result.cells:
        if c.trace is not None:
            rel = Path("traces") / f"{c.key}.csv"
            write_atomic(out / rel, c.trace.to_csv(header_lines=head))
            c.trace_path = str(rel)
    write_atomic(out / "table1.csv", result.table_csv("norms", head))
    write_atomic(out / "table2.csv", result.table_csv("exponents", head))
    summary = result.summary()
    write_atomic(out / "summary.txt", "".join(f"# {h}\n" for h in head) + summary)
    cells = [{k: v for k, v in c.to_dict().items() if k != "wall_time"} for c in result.cells]
    write_atomic(out / "report.json", report_json({"cells": cells, "passed": result.passed},
                                                  config_dict(args)))
    failures = result.failures()
    write_atomic(out / "failures.json", report_json({"failures": failures}, config_dict(args)))
    print(summary, end="")
    return EXIT_OK if not failures else EXIT_FAIL


def _looks_like_trace(text: str) -> bool:
    for line in text.splitlines():
        if line.startswith("# trace "):
            return True
        if line.strip() and not line.startswith("#"):
            return line.replace(" ", "").startswith("level,n_points")
    return False


def _load_trace(path: str, args) -> NormTrace:
    """A trace CSV as is, or a samples CSV turned into a trace."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SampleFormatError(f"cannot read {path}: {exc.strerror}") from None
    if _looks_like_trace(text):
        try:
            trace = NormTrace.from_csv(text)
        except (KeyError, ValueError) as exc:
            raise SampleFormatError(f"{path}: malformed trace CSV: {exc}") from None
        if trace.spec is None:
            trace.spec = _spec(args)
        return trace
    samples = read_samples_csv(text if "\n" in text else path)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return build_trace(_spec(args), samples.schedule(), samples.values, jitter=args.jitter)


def estimate_trace(trace: NormTrace, args) -> dict:
    """Membership and both estimates; failures of one algorithm stay in its entry."""
    out = {"levels": len(trace), "notes": list(trace.notes)}
    membership = detect_membership(trace, discard=args.discard)
    out["membership"] = membership.to_dict()
    if membership.classification == DIVERGING:
        return out
    for key, run in (
        ("algorithm1", lambda: algorithm1(trace, discard=args.discard, beta_max=args.beta_max,
                                          membership=False)),
        ("algorithm2", lambda: algorithm2(trace, discard=args.discard, pairing=args.pairing,
                                          anchor=args.anchor, membership=False)),
    ):
        try:
            out[key] = run().to_dict()
        except FitError as exc:
            out[key] = {"error": f"{type(exc).__name__}: {exc}"}
    return out


def cmd_estimate(args) -> int:
    trace = _load_trace(args.input, args)
    result = estimate_trace(trace, args)
    out = _out_dir(args)
    write_atomic(out / "estimate.json", report_json(result, config_dict(args)))
    cls = result["membership"]["classification"]
    print(f"membership: {cls}")
    if cls == DIVERGING:
        print("warning: interpolant norms keep growing; f is likely outside the native space "
              "and no norm estimate is given", file=sys.stderr)
        return EXIT_DIVERGING
    for key in ("algorithm1", "algorithm2"):
        r = result[key]
        if "error" in r:
            print(f"{key}: failed ({r['error']})")
            continue
        fit = r["fit"] or {}
        beta = fit.get("beta1", fit.get("beta2"))
        beta_s = "n/a" if beta is None else f"{beta:.4f}"
        print(f"{key}: norm {r['norm_estimate']:.10g}  beta {beta_s}")
    return EXIT_OK


def cmd_certify(args) -> int:
    samples = read_samples_csv(args.samples)
    points, values = read_holdout_csv(args.holdout, dim=samples.dim)
    spec = _spec(args)
    try:
        report = certify_from_samples(
            samples, spec, points, values, subset_size=args.subset_size, seed=args.seed,
            override_bound=args.override_bound, bound_form=args.bound, discard=args.discard,
            pairing=args.pairing, anchor=args.anchor,
            allow_inconsistent=args.override_bound is not None)
    except CertificationRefused as exc:
        print(f"warning: {exc}", file=sys.stderr)
        return EXIT_DIVERGING
    out = _out_dir(args)
    cfg = config_dict(args)
    write_atomic(out / "certify.json", report_json(report, cfg))
    d = samples.dim
    columns = [*(f"x{i + 1}" for i in range(d)), "value", "prediction", "error", "bound", "ratio"]
    rows = list(report.surface_rows())
    if args.format == "json":
        write_atomic(out / "surface.json",
                     report_json({"columns": columns, "rows": rows}, cfg))
    else:
        name = "surface.dat" if args.format == "gnuplot" else "surface.csv"
        write_atomic(out / name, render_rows(columns, rows, args.format, header_lines(args)))
    print(f"norm bound C = {report.norm_bound:.10g} ({report.bound_source}), "
          f"||s|| = {report.interpolant_norm:.10g}")
    print(f"grid points {report.grid_size}, violations {report.violations}, "
          f"max |error|/bound {report.max_ratio:.4g}")
    if not report.norm_consistent:
        print("bound refuted: C is below the norm of the sampled interpolant", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_trace(args) -> int:
    out = _out_dir(args)
    head = header_lines(args)
    if args.function:
        try:
            tf = get_function(args.function)
        except KeyError as exc:
            raise InputError(str(exc.args[0]) if exc.args else str(exc)) from None
        sched = _experiment_config(args).schedule(tf.domain)
        samples = sample_function(tf, sched)
        if args.emit_samples:
            write_atomic(out / "samples.csv", write_samples_csv(None, samples, head))
        if args.emit_holdout:
            pts = verification_grid(tf.domain)
            write_atomic(out / "holdout.csv", write_holdout_csv(None, pts, tf(pts), head))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            trace = build_trace(_spec(args), sched, samples.values, jitter=args.jitter)
        name = args.function
    else:
        trace = _load_trace(args.samples, args)
        name = Path(args.samples).stem
    if args.format == "json":
        payload = {"fill_distance": trace.fill_distance, "norm_squared": trace.norm_squared,
                   "increment_norm": [None if not np.isfinite(v) else float(v)
                                      for v in trace.increment_norm],
                   "sizes": trace.sizes, "nested": trace.nested, "notes": trace.notes}
        path = write_atomic(out / f"trace_{name}.json", report_json(payload, config_dict(args)))
    elif args.format == "gnuplot":
        rows = [[i, "" if trace.sizes is None else int(trace.sizes[i]), trace.fill_distance[i],
                 trace.norm_squared[i], trace.increment_norm[i]] for i in range(len(trace))]
        text = render_rows(["level", "n_points", "fill_distance", "norm_squared",
                            "increment_norm"], rows, "gnuplot", head)
        path = write_atomic(out / f"trace_{name}.dat", text)
    else:
        path = write_atomic(out / f"trace_{name}.csv", trace.to_csv(header_lines=head))
    print(f"wrote {path} ({len(trace)} levels)")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("kernel and schedule")
    g.add_argument("--kernel-order", type=int, default=0, choices=(0, 1, 2),
                   help="Matern order (default 0)")
    g.add_argument("--shape", type=float, default=1.0, help="kernel shape parameter")
    g.add_argument("--base", type=int, default=None,
                   help="points per axis on the coarsest grid (default 5 in 1D, 3 in 2D)")
    g.add_argument("--levels", type=int, default=None,
                   help="number of dyadic levels (default 8 in 1D, 6 in 2D)")
    g.add_argument("--max-points", type=int, default=65**2, help="cap on points per level")
    g.add_argument("--endpoints", action="store_true",
                   help="grids include the boundary instead of interior grids")
    g.add_argument("--jitter", action="store_true",
                   help="allow a diagonal shift when a kernel matrix is too ill-conditioned")
    e = common.add_argument_group("estimation")
    e.add_argument("--beta-max", type=float, default=6.0, help="upper bound on beta1")
    e.add_argument("--discard", type=int, default=DEFAULT_DISCARD,
                   help="coarse levels left out of the fits")
    e.add_argument("--pairing", choices=("coarse", "fine"), default="coarse",
                   help="pair each increment with the coarser or finer fill distance")
    e.add_argument("--anchor", choices=("first", "last"), default="first",
                   help="where algorithm 2 starts the fitted increment series")
    o = common.add_argument_group("output")
    o.add_argument("--out", default=None,
                   help=f"output directory (default ${ENV_OUT} or ./{DEFAULT_OUT})")
    o.add_argument("--format", choices=("csv", "gnuplot", "json"), default="csv",
                   help="format of trace and surface files")
    o.add_argument("--seed", type=int, default=0, help="seed for random subset choices")
    o.add_argument("--quiet", action="store_true", help="no progress lines")

    p = argparse.ArgumentParser(prog="rkhsnorm",
                                description="Estimate RKHS norms from samples of a function.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("tables", parents=[common], help="run the registry experiments")
    t.add_argument("--kernels", type=_int_list, default=None,
                   help="comma-separated Matern orders (default: --kernel-order)")
    t.add_argument("--functions", type=_name_list, default=None,
                   help="comma-separated registry names (default: all)")
    t.add_argument("--max-level", type=int, default=None, help="finest level to compute")
    t.set_defaults(func=cmd_tables)

    s = sub.add_parser("estimate", parents=[common],
                       help="estimate the norm from a samples CSV or a trace CSV")
    s.add_argument("input", help="samples CSV (dim,d header) or trace CSV")
    s.set_defaults(func=cmd_estimate)

    c = sub.add_parser("certify", parents=[common], help="check the error bound on holdout data")
    c.add_argument("samples", help="nested samples CSV")
    c.add_argument("holdout", help="holdout CSV: dim,d then x_1..x_d,value rows")
    c.add_argument("--override-bound", type=float, default=None,
                   help="use this norm bound instead of the algorithm 2 estimate")
    c.add_argument("--subset-size", type=int, default=50,
                   help="points drawn from the finest level for the interpolant")
    c.add_argument("--bound", choices=("loose", "tight"), default="loose",
                   help="C*P(x) or P(x)*sqrt(C^2-||s||^2)")
    c.set_defaults(func=cmd_certify)

    r = sub.add_parser("trace", parents=[common], help="write the norm trace of one target")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--function", help="registry function name")
    src.add_argument("--samples", help="samples CSV")
    r.add_argument("--emit-samples", action="store_true",
                   help="also write samples.csv (with --function)")
    r.add_argument("--emit-holdout", action="store_true",
                   help="also write holdout.csv on the verification grid (with --function)")
    r.set_defaults(func=cmd_trace)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return args.func(args)
    except (InputError, SampleFormatError, GeometryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConditioningError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
