"""Certify an error bound for a map known only through a table of samples.

This is the workflow for an externally tabulated function, such as a
controller evaluated offline on nested grids:

1. write the samples to CSV (here: the Franke function on [0, 1]^2),
2. estimate the norm bound C with algorithm 2,
3. check |f - s| <= C * P_X on a 100 x 100 holdout grid,
4. show that an understated C is caught.

The same steps run from the shell with ``rkhsnorm trace`` and
``rkhsnorm certify``.

    python3 demos/03_certify_tabulated_map.py [output-dir]
"""
import sys
from pathlib import Path

from rkhsnorm import KernelSpec, make_dyadic_schedule
from rkhsnorm.testbed import (
    certify_from_samples,
    get_function,
    read_holdout_csv,
    read_samples_csv,
    sample_function,
    verification_grid,
    write_holdout_csv,
    write_samples_csv,
)

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo-out")
out.mkdir(parents=True, exist_ok=True)

franke = get_function("franke")
schedule = make_dyadic_schedule(franke.domain, 3, 5)  # 3x3 up to 33x33, nested
write_samples_csv(out / "franke_samples.csv", sample_function(franke, schedule))
grid = verification_grid(franke.domain)
write_holdout_csv(out / "franke_holdout.csv", grid, franke(grid))
print(f"wrote {out / 'franke_samples.csv'} and {out / 'franke_holdout.csv'}")

# From here on only the files are used.
samples = read_samples_csv(out / "franke_samples.csv")
points, values = read_holdout_csv(out / "franke_holdout.csv", dim=samples.dim)
spec = KernelSpec(0)

report = certify_from_samples(samples, spec, points, values, subset_size=50, seed=0)
print(f"C = {report.norm_bound:.5f} from algorithm 2, interpolant on {report.subset_size} points "
      f"has norm {report.interpolant_norm:.5f}")
print(f"violations {report.violations} of {report.grid_size}, "
      f"largest |error| / bound = {report.max_ratio:.3f}")

low = report.interpolant_norm * 0.9
bad = certify_from_samples(samples, spec, points, values, override_bound=low,
                           bound_form="tight", allow_inconsistent=True)
print(f"with C = {low:.5f} (below ||s||): consistent={bad.norm_consistent}, "
      f"violations {bad.violations} -> certificate {'passes' if bad.passed else 'fails'}")
