"""Adaptive Dormand-Prince 5(4) integration.

`integrate` works with any right-hand side callable and numpy states; the
specialised compass-gait loop lives in `_flow_py` (with a compiled twin in
`_fastflow`) because the continuation kernels spend almost all of their time
there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError

# Butcher tableau.
C2, C3, C4, C5 = 0.2, 0.3, 0.8, 8.0 / 9.0
A21 = 0.2
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                           49.0 / 176.0, -5103.0 / 18656.0)
B1, B3, B4, B5, B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
# Difference between the 5th- and 4th-order solutions.
E1, E3, E4, E5, E6, E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                          -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
MAX_STEPS = 100_000


@dataclass
class OdeResult:
    t: float
    y: np.ndarray
    f: np.ndarray          # derivative at the final state
    nsteps: int
    nrejected: int
    sample_t: np.ndarray | None = None
    sample_y: np.ndarray | None = None


def _error_norm(err, y0, y1, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def _initial_step(f, t0, y0, f0, t1, rtol, atol):
    scale = atol + rtol * np.abs(y0)
    d0 = float(np.sqrt(np.mean((y0 / scale) ** 2)))
    d1 = float(np.sqrt(np.mean((f0 / scale) ** 2)))
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, abs(t1 - t0))
    y1 = y0 + h0 * f0
    f1 = np.asarray(f(t0 + h0, y1), dtype=float)
    d2 = float(np.sqrt(np.mean(((f1 - f0) / scale) ** 2))) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100.0 * h0, h1, abs(t1 - t0))


def _hermite(t, t0, t1, y0, y1, f0, f1):
    h = t1 - t0
    s = (t - t0) / h
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


def integrate(f, y0, t0: float, t1: float, rtol: float = 1e-10,
              atol: float = 1e-12, t_eval=None) -> OdeResult:
    """Integrate ``y' = f(t, y)`` from ``t0`` to ``t1`` (``t1 >= t0``).

    ``t_eval`` requests cubic-Hermite samples of the solution at the given
    times; the step sequence itself is not affected by sampling.
    """
    y = np.array(y0, dtype=float)
    if not np.all(np.isfinite(y)):
        raise InputError("non-finite initial state")
    if t1 < t0:
        raise InputError(f"backward integration not supported (t1={t1} < t0={t0})")

    want_samples = t_eval is not None
    if want_samples:
        t_eval = np.asarray(t_eval, dtype=float)
        sample_y = np.empty((t_eval.shape[0], y.shape[0]))
        next_sample = 0
    k1 = np.asarray(f(t0, y), dtype=float)
    t = t0
    if t1 == t0:
        if want_samples:
            sample_y[:] = y
            return OdeResult(t, y, k1, 0, 0, t_eval, sample_y)
        return OdeResult(t, y, k1, 0, 0)

    h = _initial_step(f, t0, y, k1, t1, rtol, atol)
    nsteps = 0
    nrejected = 0
    while t < t1:
        if nsteps + nrejected > MAX_STEPS:
            raise RuntimeError(f"integration exceeded {MAX_STEPS} steps at t={t}")
        h = min(h, t1 - t)
        k2 = np.asarray(f(t + C2 * h, y + h * (A21 * k1)), dtype=float)
        k3 = np.asarray(f(t + C3 * h, y + h * (A31 * k1 + A32 * k2)), dtype=float)
        k4 = np.asarray(f(t + C4 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3)), dtype=float)
        k5 = np.asarray(f(t + C5 * h, y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4)),
                        dtype=float)
        k6 = np.asarray(f(t + h, y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5)),
                        dtype=float)
        y_new = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
        k7 = np.asarray(f(t + h, y_new), dtype=float)
        err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        norm = _error_norm(err, y, y_new, rtol, atol)
        if norm <= 1.0:
            t_new = t + h
            if want_samples:
                while next_sample < t_eval.shape[0] and t_eval[next_sample] <= t_new + 1e-15:
                    ts = min(t_eval[next_sample], t_new)
                    sample_y[next_sample] = _hermite(ts, t, t_new, y, y_new, k1, k7)
                    next_sample += 1
            t = t_new
            y = y_new
            k1 = k7
            nsteps += 1
            factor = MAX_FACTOR if norm == 0.0 else min(MAX_FACTOR, SAFETY * norm ** -0.2)
            h *= max(MIN_FACTOR, factor)
        else:
            nrejected += 1
            h *= max(MIN_FACTOR, SAFETY * norm ** -0.2)
    if want_samples:
        while next_sample < t_eval.shape[0]:
            sample_y[next_sample] = y
            next_sample += 1
        return OdeResult(t, y, k1, nsteps, nrejected, t_eval, sample_y)
    return OdeResult(t, y, k1, nsteps, nrejected)
