"""Compare the compiled rollout kernel against the numpy reference.

Rolls a uniform grid of initial states through the double-integrator
closed loop and reports per-backend wall time. Run from the repo root:

    python3 benchmarks/bench_kernels.py --grid 40 --steps 10000
"""
import argparse
import os
import time

import numpy as np

from polyreach._kernels import _ref
from polyreach.cli import load_system
from polyreach.sim import _tables, grid_points, lqr_baseline

try:
    from polyreach._kernels import _fast
except ImportError:
    _fast = None

DEFAULT_SYSTEM = os.path.join(os.path.dirname(os.path.abspath(__file__)),
                              os.pardir, "systems", "double_integrator.json")


def bench(backend, pts, steps, tables, repeat):
    best = float("inf")
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = backend.rollout_batch(pts, steps, *tables, record=False)
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--system", default=DEFAULT_SYSTEM)
    ap.add_argument("--grid", type=int, default=40,
                    help="vertices per axis")
    ap.add_argument("--steps", type=int, default=10_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    spec = load_system(args.system)
    ctrl = lqr_baseline(spec, np.eye(spec.n), np.eye(spec.m))
    pts = grid_points(spec.X, [args.grid] * spec.n)
    keep = np.array([spec.X.contains(p) for p in pts])
    pts = pts[keep]
    tables = _tables(spec, ctrl)
    total_steps = None

    print(f"{len(pts)} initial states, horizon {args.steps}, "
          f"best of {args.repeat}")
    rows = []
    for name, backend in [("numpy", _ref)] + \
            ([("compiled", _fast)] if _fast else []):
        seconds, (outcomes, steps, _, _) = bench(backend, pts, args.steps,
                                                 tables, args.repeat)
        total_steps = int(steps.sum()) + len(pts)
        rows.append((name, seconds, outcomes, steps))
        print(f"  {name:<9} {seconds:8.3f}s   "
              f"{total_steps / seconds / 1e6:6.1f} M steps/s")
    if len(rows) == 2:
        (_, t_ref, o_ref, s_ref), (_, t_fast, o_fast, s_fast) = rows
        agree = (np.array_equal(o_ref, o_fast)
                 and np.array_equal(s_ref, s_fast))
        print(f"  speedup {t_ref / t_fast:.1f}x; outcomes agree: {agree}")
    elif _fast is None:
        print("  compiled kernel not built; numpy only")


if __name__ == "__main__":
    main()
