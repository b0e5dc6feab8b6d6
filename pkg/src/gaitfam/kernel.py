"""Flow-kernel backend selection.

The one-step flow of the shipped walker models runs through a specialised
stepping loop.  A compiled extension (``gaitfam._fastflow``) is used when it
was built; otherwise the pure-Python twin ``gaitfam._flow_py`` takes over.
Set ``GAITFAM_PURE_PYTHON=1`` to force the fallback, e.g. for benchmarking.
"""

from __future__ import annotations

import os

from . import _flow_py

_compiled = None
if os.environ.get("GAITFAM_PURE_PYTHON", "0") in ("", "0"):
    try:
        from . import _fastflow as _compiled  # type: ignore[no-redef]
    except ImportError:
        _compiled = None

_backend = _compiled if _compiled is not None else _flow_py


def active_backend() -> str:
    return "compiled" if _backend is not _flow_py else "python"


def backends() -> dict:
    """All importable backends, keyed by name (used by the benchmark)."""
    out = {"python": _flow_py}
    if _compiled is not None:
        out["compiled"] = _compiled
    return out


def flow_end_specialized(fast_params: tuple, y0, tau: float, mu0: float,
                         rtol: float, atol: float, backend=None):
    """Run the specialised stepping loop.

    Returns ``(y_end, f_end, nsteps, nrejected)`` with ``y_end``/``f_end``
    as 4-tuples of floats.  Raises ``RuntimeError`` if the step budget was
    exhausted (flagged by a negative rejection count).
    """
    kind, ca, cb, mlb, g1, g2, bu1, bu2, omega = fast_params
    if kind != "compass":
        raise ValueError(f"unknown fast-flow kernel {kind!r}")
    impl = backend if backend is not None else _backend
    out = impl.flow_end(ca, cb, mlb, g1, g2, bu1, bu2, mu0, omega,
                        y0[0], y0[1], y0[2], y0[3], tau, rtol, atol)
    if out[9] < 0:
        raise RuntimeError("flow integration exceeded the step budget")
    return out[0:4], out[4:8], out[8], out[9]
