"""Compare the compiled and pure-Python flow kernels.

Usage: python benchmarks/bench_kernels.py

Times the one-step flow, the periodicity Jacobian, and a short branch trace
for every importable backend, and reports the agreement between them.
"""

import os
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

import numpy as np  # noqa: E402

from gaitfam import continuation, hybrid, kernel, models  # noqa: E402


def time_flow(backend, params, reps=400):
    y0 = (0.05, -0.03, -0.4, 0.1)
    start = time.perf_counter()
    for _ in range(reps):
        out = kernel.flow_end_specialized(params, y0, 0.7, 1.5, 1e-10, 1e-12,
                                          backend=backend)
    return (time.perf_counter() - start) / reps, np.array(out[0])


def time_jacobian(model, reps=20):
    c = hybrid.point_for(model, np.array([0.2, -0.25, -1.0, 0.3]), 0.68)
    start = time.perf_counter()
    for _ in range(reps):
        hybrid.jacobian(model, c)
    return (time.perf_counter() - start) / reps


def time_trace(model, count=20):
    seeds, _ = continuation.scan_singular(model, np.zeros(4), [],
                                          interval=(0.6, 0.72), steps=12)
    cmap = continuation.constant_control_map(model, [])
    start = time.perf_counter()
    cur = continuation.cm_curve(cmap, seeds[0].point.vector,
                                seeds[0].trace_direction, count, 0.05)
    elapsed = time.perf_counter() - start
    return elapsed / (len(cur.points) - 1)


def main():
    impls = kernel.backends()
    print(f"active backend: {kernel.active_backend()}")
    print(f"available: {', '.join(impls)}")
    act = models.compass_gait(actuated=True)

    results = {}
    print(f"\n{'backend':>10} {'flow (ms)':>12} {'jacobian (ms)':>15} "
          f"{'trace (ms/gait)':>17}")
    for name, impl in impls.items():
        flow_ms, y_end = time_flow(impl, act.fast_flow)
        results[name] = y_end
        # route the whole pipeline through this backend
        kernel._backend = impl
        try:
            jac_ms = time_jacobian(models.compass_gait())
            trace_ms = time_trace(models.compass_gait())
        finally:
            kernel._backend = impls.get("compiled", impls["python"])
        print(f"{name:>10} {flow_ms * 1e3:12.3f} {jac_ms * 1e3:15.1f} "
              f"{trace_ms * 1e3:17.1f}")

    if len(results) == 2:
        diff = float(np.max(np.abs(results["python"] - results["compiled"])))
        print(f"\nend-state max |difference| between backends: {diff:.3e}")


if __name__ == "__main__":
    main()
