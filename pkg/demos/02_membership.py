"""Tell apart functions inside and outside the native space.

|x| has a kink. Under the exponential kernel (order 0) its native space
is H^1 and |x| belongs to it. The order-1 and order-2 Matern kernels need
more smoothness, so the interpolant norms of |x| keep growing as the
grid is refined, and no norm estimate should be trusted.

    python3 demos/02_membership.py
"""
import numpy as np

from rkhsnorm import BoxDomain, KernelSpec, NoDecayError, algorithm2, build_trace
from rkhsnorm import detect_membership, make_dyadic_schedule

domain = BoxDomain.interval(-1.0, 1.0)
schedule = make_dyadic_schedule(domain, 5, 8, endpoints=False)
targets = {
    "|x|": lambda x: np.abs(x[:, 0]),
    "exp(-x/2)": lambda x: np.exp(-0.5 * x[:, 0]),
}

for name, f in targets.items():
    for order in (0, 1, 2):
        trace = build_trace(KernelSpec(order), schedule, f)
        m = detect_membership(trace)
        growth = trace.norm_squared[-1] / trace.norm_squared[-4]
        line = f"{name:10s} order {order}: {m.classification:11s} ||s||^2 grew x{growth:.3f} over 3 levels"
        if m.classification != "diverging":
            try:
                line += f", estimate {algorithm2(trace, membership=False).norm_estimate:.4f}"
            except NoDecayError as exc:
                line += f" ({exc})"
        print(line)
