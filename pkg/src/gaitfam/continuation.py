"""Continuation kernels: singular-gait scan, pseudo-arclength tracing,
projected Newton and family construction.

The kernels operate on packed point vectors ``[x0, tau, mu]`` so they apply
equally to gait maps and to plain test maps (circles, toy systems).  The
gait-aware drivers (`build_family`, `multi_dim`) handle the packing and the
bookkeeping of branches and metadata.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import hybrid, models
from .dynamics import HybridModel, RobotState, constrained_accel
from .errors import CorrectorError, InputError, NoTangentError, StepFailureError
from .hybrid import GaitPoint
from .linalg import fd_jacobian, fix_sign, nullspace, pinv_solve, tangent_vector

CORRECTOR_TOL = 1e-10
CORRECTOR_MAXIT = 50
STEP_MIN = 1e-6
INDICATOR_ROOT_TOL = 1e-10
BRACKET_WIDTH_TOL = 1e-12
CONSTANT_ZERO_LEVEL = 1e-12


# ---------------------------------------------------------------------------
# maps


@dataclass
class ContinuationMap:
    """A residual map whose zero set is traced by the continuation kernels."""

    residual: Callable[[np.ndarray], np.ndarray]
    dim: int
    m: int
    kind: str = "custom"
    aux_spec: str = ""


def constant_control_map(model: HybridModel, mu0, rtol: float = hybrid.RTOL_DEFAULT,
                         atol: float = hybrid.ATOL_DEFAULT) -> ContinuationMap:
    """Periodicity map restricted to the slice with controls pinned at
    ``mu0`` (the slice where open-loop and passive branches live)."""
    mu0 = np.atleast_1d(np.asarray(mu0, dtype=float))

    def residual(vec: np.ndarray) -> np.ndarray:
        res = hybrid.residual_vector(model, vec, rtol=rtol, atol=atol)
        if model.k:
            res = np.concatenate([res, vec[model.state_dim + 1:] - mu0])
        return res

    return ContinuationMap(residual=residual, dim=model.point_dim,
                           m=model.state_dim + model.k, kind="constant-control",
                           aux_spec=f"mu = {mu0.tolist()}")


def fixed_time_map(model: HybridModel, free_index: int, tau_fix: float, upsilon,
                   rtol: float = hybrid.RTOL_DEFAULT,
                   atol: float = hybrid.ATOL_DEFAULT) -> ContinuationMap:
    """Periodicity map on the slice with the step duration and all controls
    but one pinned; the free control is ``mu[free_index]``."""
    upsilon = np.atleast_1d(np.asarray(upsilon, dtype=float))
    if not 0 <= free_index < model.k:
        raise InputError(f"free control index {free_index} out of range for k={model.k}")

    def residual(vec: np.ndarray) -> np.ndarray:
        res = hybrid.residual_vector(model, vec, rtol=rtol, atol=atol)
        aux = [vec[model.state_dim] - tau_fix]
        for j in range(model.k):
            if j != free_index:
                aux.append(vec[model.state_dim + 1 + j] - upsilon[j])
        return np.concatenate([res, aux])

    return ContinuationMap(residual=residual, dim=model.point_dim,
                           m=model.state_dim + model.k, kind="constant-time",
                           aux_spec=f"tau = {tau_fix}, free mu index {free_index}")


# ---------------------------------------------------------------------------
# projected Newton


@dataclass
class BoxBounds:
    """Elementwise bounds on the continuation vector; infinities allowed."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.lower.shape != self.upper.shape:
            raise InputError("bound vectors must have equal length")
        if np.any(self.lower > self.upper):
            raise InputError("lower bound exceeds upper bound")

    @classmethod
    def unbounded(cls, dim: int) -> "BoxBounds":
        return cls(np.full(dim, -np.inf), np.full(dim, np.inf))

    def clip(self, vec: np.ndarray) -> np.ndarray:
        return np.minimum(np.maximum(vec, self.lower), self.upper)


@dataclass
class NewtonResult:
    point: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    at_bounds: np.ndarray


def projected_newton(residual: Callable[[np.ndarray], np.ndarray], c0: np.ndarray,
                     bounds: BoxBounds | None = None, tol: float = CORRECTOR_TOL,
                     maxit: int = CORRECTOR_MAXIT) -> NewtonResult:
    """Newton iteration with a pseudoinverse step, projected onto box
    constraints after every update.

    Terminates on a small residual or on a stationary iterate; the latter
    happens at active bounds and is reported with ``converged=False`` and
    the residual that remains.  Runs past the iteration budget raise
    :class:`CorrectorError`.
    """
    z = np.asarray(c0, dtype=float).copy()
    if bounds is None:
        bounds = BoxBounds.unbounded(z.shape[0])
    z = bounds.clip(z)
    rnorm = float(np.linalg.norm(residual(z)))
    for it in range(1, maxit + 1):
        r = np.asarray(residual(z), dtype=float)
        rnorm = float(np.linalg.norm(r))
        if rnorm < tol:
            return NewtonResult(z, rnorm, it - 1, True, _active(z, bounds))
        jac = fd_jacobian(residual, z, f0=r)
        step = pinv_solve(jac, r)
        z_new = bounds.clip(z - step)
        if np.linalg.norm(z_new - z) <= 1e-14 * (1.0 + np.linalg.norm(z)):
            rnorm = float(np.linalg.norm(residual(z_new)))
            return NewtonResult(z_new, rnorm, it, rnorm < tol, _active(z_new, bounds))
        z = z_new
    rnorm = float(np.linalg.norm(residual(z)))
    if rnorm < tol:
        return NewtonResult(z, rnorm, maxit, True, _active(z, bounds))
    raise CorrectorError(
        f"projected Newton did not converge in {maxit} iterations "
        f"(residual {rnorm:.3e})", point=z, residual_norm=rnorm, iterations=maxit)


def _active(z: np.ndarray, bounds: BoxBounds) -> np.ndarray:
    return (z <= bounds.lower) | (z >= bounds.upper)


# ---------------------------------------------------------------------------
# pseudo-arclength stepping


def cm_step(cmap: ContinuationMap, c: np.ndarray, cdot: np.ndarray, h: float,
            bounds: BoxBounds | None = None, tol: float = CORRECTOR_TOL,
            maxit: int = CORRECTOR_MAXIT) -> np.ndarray:
    """One predictor-corrector step: Euler prediction along the unit tangent
    ``cdot``, then Newton correction onto the map's zero set intersected
    with the hyperplane at arclength ``h``."""
    c = np.asarray(c, dtype=float)
    cdot = np.asarray(cdot, dtype=float)
    nrm = np.linalg.norm(cdot)
    if not math.isclose(nrm, 1.0, rel_tol=1e-8):
        raise InputError(f"tangent must be a unit vector (norm {nrm})")

    def stacked(z: np.ndarray) -> np.ndarray:
        return np.concatenate([cmap.residual(z), [cdot @ (z - c) - h]])

    z0 = c + cdot * h
    try:
        res = projected_newton(stacked, z0, bounds=bounds, tol=tol, maxit=maxit)
    except CorrectorError as exc:
        raise StepFailureError(
            f"continuation step of size {h:.3g} failed: {exc}",
            point=exc.point, residual_norm=exc.residual_norm,
            iterations=exc.iterations) from exc
    if not res.converged:
        raise StepFailureError(
            f"continuation step of size {h:.3g} stalled at residual "
            f"{res.residual_norm:.3e}", point=res.point,
            residual_norm=res.residual_norm, iterations=res.iterations)
    return res.point


@dataclass
class CurveResult:
    points: list[np.ndarray]          # includes the seed at index 0
    tangents: list[np.ndarray]
    residual_norms: list[float]
    status: str                       # "ok" or "step-failure"
    message: str = ""

    def __len__(self):
        return len(self.points)


def cm_curve(cmap: ContinuationMap, c0: np.ndarray, cdot0: np.ndarray, count: int,
             h: float, bounds: BoxBounds | None = None, tol: float = CORRECTOR_TOL,
             h_min: float = STEP_MIN, maxit: int = CORRECTOR_MAXIT) -> CurveResult:
    """Trace ``count`` points of the map's zero-set curve from ``c0``.

    The step size halves on corrector failure and is restored after three
    consecutive successes; tangent orientation is kept consistent so the
    trace never doubles back.  A partial curve with a diagnostic is returned
    when the step size bottoms out.
    """
    from .errors import GaitfamError

    c = np.asarray(c0, dtype=float).copy()
    cdot = np.asarray(cdot0, dtype=float) / np.linalg.norm(cdot0)
    points = [c.copy()]
    tangents = [cdot.copy()]
    residuals = [float(np.linalg.norm(cmap.residual(c)))]
    h_cur = h
    streak = 0
    status, message = "ok", ""
    while len(points) <= count:
        try:
            z = cm_step(cmap, c, cdot, h_cur, bounds=bounds, tol=tol, maxit=maxit)
            new_tan = tangent_vector(fd_jacobian(cmap.residual, z), orient=cdot)
            new_res = float(np.linalg.norm(cmap.residual(z)))
        except (GaitfamError, RuntimeError) as exc:
            # Failed correction, lost tangent, or a trial that left the
            # domain: shrink the step and retry from the last good point.
            h_cur *= 0.5
            streak = 0
            if abs(h_cur) < h_min:
                status = "step-failure"
                message = (f"step size fell below {h_min:g} after "
                           f"{len(points) - 1} points: {exc}")
                break
            continue
        c = z
        cdot = new_tan
        points.append(c.copy())
        tangents.append(cdot.copy())
        residuals.append(new_res)
        streak += 1
        if streak >= 3 and abs(h_cur) < abs(h):
            h_cur = math.copysign(min(2.0 * abs(h_cur), abs(h)), h_cur)
            streak = 0
    return CurveResult(points=points, tangents=tangents, residual_norms=residuals,
                       status=status, message=message)


# ---------------------------------------------------------------------------
# singular-gait detection


@dataclass
class SingularEG:
    """A singular equilibrium gait found by the indicator scan.

    ``tangent`` is the branch direction expressed at the start-of-step state
    (touchdown configuration with post-impact velocities), the customary
    chart for reporting fixed points of walkers of this family.
    ``trace_direction`` is the same direction pulled back to the pre-impact
    chart used by the continuation maps; the tracer seeds with it.  Both are
    unit vectors orthogonal to the switching-time axis.
    """

    point: GaitPoint
    tangent: np.ndarray | None
    trace_direction: np.ndarray | None
    indicator_root: float
    indicator_value: float
    null_dim: int


@dataclass
class DiagnosticReport:
    samples: list[tuple[float, float]]
    classification: str               # "ok", "no-crossing", "constant-zero"
    remediation: str

    @property
    def max_abs_indicator(self) -> float:
        return max((abs(v) for _, v in self.samples), default=0.0)


_REMEDIATION = {
    "ok": "",
    "no-crossing": (
        "The indicator keeps one sign over the window. Widen the scan "
        "interval; if the model can balance with actuation, seed the "
        "homotopy query driver from a regular equilibrium instead."),
    "constant-zero": (
        "The indicator vanishes identically: the rest set has extra free "
        "directions. Look for a decoupled or unconstrained coordinate and "
        "lock it, or drop the redundant periodicity constraint."),
}


def classify_scan(samples: list[tuple[float, float]], n_roots: int) -> DiagnosticReport:
    if n_roots > 0:
        kind = "ok"
    elif max((abs(v) for _, v in samples), default=0.0) < CONSTANT_ZERO_LEVEL:
        kind = "constant-zero"
    else:
        kind = "no-crossing"
    return DiagnosticReport(samples=samples, classification=kind,
                            remediation=_REMEDIATION[kind])


def indicator(model: HybridModel, x_eq, mu, tau: float,
              rtol: float = hybrid.RTOL_DEFAULT, atol: float = hybrid.ATOL_DEFAULT) -> float:
    """Determinant of the state block of the periodicity Jacobian along the
    rest family; its roots are the singular equilibrium gaits."""
    c = hybrid.point_for(model, x_eq, tau, mu)
    return float(np.linalg.det(hybrid.state_block(model, c, rtol=rtol, atol=atol)))


def _polish_root(fun, lo: float, hi: float, f_lo: float, f_hi: float,
                 abs_tol: float = INDICATOR_ROOT_TOL,
                 width_tol: float = BRACKET_WIDTH_TOL, maxit: int = 90):
    """Bisection-safeguarded secant root polish inside a sign bracket."""
    t_prev, f_prev = lo, f_lo
    t_cur, f_cur = hi, f_hi
    for _ in range(maxit):
        if abs(f_cur) < abs_tol or (hi - lo) < width_tol:
            break
        if f_cur != f_prev:
            cand = t_cur - f_cur * (t_cur - t_prev) / (f_cur - f_prev)
        else:
            cand = 0.5 * (lo + hi)
        if not lo < cand < hi:
            cand = 0.5 * (lo + hi)
        f_cand = fun(cand)
        t_prev, f_prev = t_cur, f_cur
        t_cur, f_cur = cand, f_cand
        if f_lo * f_cand <= 0:
            hi, f_hi = cand, f_cand
        else:
            lo, f_lo = cand, f_cand
    return t_cur, f_cur


def _jump_chart_tangent(model: HybridModel, point: GaitPoint,
                        direction: np.ndarray) -> np.ndarray:
    """Push a pre-impact-chart tangent through the impact derivative to the
    start-of-step chart (positions unchanged, velocities through the
    impulse map)."""
    from .dynamics import impact
    from .linalg import fd_step

    n2 = model.state_dim
    x0 = point.x0.vector
    mapped = np.zeros_like(direction)
    mapped[n2:] = direction[n2:]
    state_dir = direction[:n2]
    h = fd_step(0.0)
    xp = x0 + h * state_dir
    xm = x0 - h * state_dir
    dp = np.concatenate([xp[:model.n], impact(model, RobotState.from_vector(xp)).qdot_plus])
    dm = np.concatenate([xm[:model.n], impact(model, RobotState.from_vector(xm)).qdot_plus])
    mapped[:n2] = (dp - dm) / (2.0 * h)
    nrm = np.linalg.norm(mapped)
    return fix_sign(mapped / nrm)


def scan_singular(model: HybridModel, x_eq, mu, interval=(0.1, 1.0), steps: int = 100,
                  rtol: float = hybrid.RTOL_DEFAULT, atol: float = hybrid.ATOL_DEFAULT):
    """Bracket and polish the roots of the indicator over a window of step
    durations.

    Returns ``(seeds, samples)`` where ``samples`` is the indicator grid
    used for diagnostics.  An empty seed list is a valid outcome.
    """
    a, b = float(interval[0]), float(interval[1])
    if not (a < b and a > 0):
        raise InputError(f"scan interval must satisfy 0 < a < b, got ({a}, {b})")
    if steps < 1:
        raise InputError("scan needs at least one step")
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    taus = np.linspace(a, b, steps + 1)
    vals = [indicator(model, x_eq, mu, t, rtol=rtol, atol=atol) for t in taus]
    samples = list(zip(taus.tolist(), vals))

    fun = lambda t: indicator(model, x_eq, mu, t, rtol=rtol, atol=atol)
    e0 = np.zeros(model.point_dim)
    e0[model.state_dim] = 1.0
    seeds: list[SingularEG] = []
    if max(abs(v) for v in vals) < CONSTANT_ZERO_LEVEL:
        return seeds, samples
    for i in range(steps):
        if vals[i] == 0.0 and vals[i + 1] == 0.0:
            continue
        if vals[i] * vals[i + 1] > 0.0:
            continue
        root, f_root = _polish_root(fun, taus[i], taus[i + 1], vals[i], vals[i + 1])
        point = hybrid.point_for(model, x_eq, root, mu)
        jac = hybrid.jacobian(model, point, rtol=rtol, atol=atol).jac
        if model.k:
            phi0 = np.zeros((model.k, model.point_dim))
            phi0[:, model.state_dim + 1:] = np.eye(model.k)
            jac = np.vstack([jac, phi0])
        basis = nullspace(jac)
        null_dim = basis.shape[1]
        tangent = trace_dir = None
        if null_dim == 2:
            # The null direction orthogonal to the switching-time axis.
            coeff = basis.T @ e0
            alpha = np.array([-coeff[1], coeff[0]])
            vec = basis @ alpha
            vec = vec - (vec @ e0) * e0
            trace_dir = fix_sign(vec / np.linalg.norm(vec))
            tangent = _jump_chart_tangent(model, point, trace_dir)
        seeds.append(SingularEG(point=point, tangent=tangent,
                                trace_direction=trace_dir,
                                indicator_root=float(root),
                                indicator_value=float(f_root),
                                null_dim=null_dim))
    return seeds, samples


# ---------------------------------------------------------------------------
# family construction


@dataclass
class GaitRecord:
    x0: np.ndarray
    tau: float
    mu: np.ndarray
    residual: float
    slope: float
    step_length: float
    push_pull: bool

    def gait_point(self, model: HybridModel) -> GaitPoint:
        return hybrid.point_for(model, self.x0, self.tau, self.mu)


@dataclass
class Branch:
    seed_index: int
    sign: int
    map_kind: str
    status: str
    gaits: list[GaitRecord]
    message: str = ""


@dataclass
class GaitFamily:
    model_params: dict
    seeds: list[SingularEG]
    branches: list[Branch]
    scan_interval: tuple[float, float]
    scan_steps: int
    scan_samples: list[tuple[float, float]]
    diagnostic: DiagnosticReport | None = None

    @property
    def gait_count(self) -> int:
        return sum(len(b.gaits) for b in self.branches)


def _min_normal_reaction(model: HybridModel, c: GaitPoint, sigma: float,
                         samples: int = 25) -> float:
    """Smallest surface-normal component of the stance reaction force over
    one step (coarse sampling; diagnostic only)."""
    ts = np.linspace(0.0, c.tau, samples)
    res = hybrid.flow(model, c, rtol=1e-7, atol=1e-9, t_eval=ts)
    normal = np.array([math.sin(sigma), math.cos(sigma)])
    worst = math.inf
    for t, y in zip(res.sample_t, res.sample_y):
        ev = constrained_accel(model, RobotState(y[:model.n], y[model.n:]),
                               float(t), c.mu)
        worst = min(worst, float(ev.lam @ normal))
    return worst


def gait_record(model: HybridModel, vec: np.ndarray, residual: float,
                with_reaction: bool = True) -> GaitRecord:
    c = GaitPoint.from_vector(vec, model.n)
    sigma = models.slope(model, c)
    push_pull = False
    if with_reaction and model.reaction_fn is not None:
        push_pull = _min_normal_reaction(model, c, sigma) < 0.0
    return GaitRecord(x0=c.x0.vector, tau=c.tau, mu=c.mu.copy(), residual=residual,
                      slope=sigma, step_length=models.step_length(model, c),
                      push_pull=push_pull)


def build_family(model: HybridModel, c_eq: GaitPoint, scan_interval=(0.1, 1.0),
                 count: int = 250, h: float = 0.05, steps: int = 100,
                 rtol: float = hybrid.RTOL_DEFAULT, atol: float = hybrid.ATOL_DEFAULT,
                 with_reaction: bool = True, tol: float = CORRECTOR_TOL) -> GaitFamily:
    """Scan the rest family of ``c_eq`` for singular gaits and trace one
    branch per seed and tangent sign in the constant-control slice.

    Partial results are always returned; an empty scan yields an empty
    family carrying the indicator samples and a failure classification.
    """
    seeds, samples = scan_singular(model, c_eq.x0.vector, c_eq.mu,
                                   interval=scan_interval, steps=steps,
                                   rtol=rtol, atol=atol)
    report = classify_scan(samples, len(seeds))
    family = GaitFamily(model_params=dict(model.params), seeds=seeds, branches=[],
                        scan_interval=(float(scan_interval[0]), float(scan_interval[1])),
                        scan_steps=steps, scan_samples=samples,
                        diagnostic=None if seeds else report)
    cmap = constant_control_map(model, c_eq.mu, rtol=rtol, atol=atol)
    for idx, seed in enumerate(seeds):
        if seed.trace_direction is None:
            family.branches.append(Branch(
                seed_index=idx, sign=0, map_kind=cmap.kind, status="skipped",
                gaits=[], message=(f"null space at the seed is "
                                   f"{seed.null_dim}-dimensional; not switching")))
            continue
        for sign in (1, -1):
            curve = cm_curve(cmap, seed.point.vector, sign * seed.trace_direction,
                             count, h, tol=tol)
            gaits = [gait_record(model, vec, rn, with_reaction=with_reaction)
                     for vec, rn in zip(curve.points[1:], curve.residual_norms[1:])]
            family.branches.append(Branch(seed_index=idx, sign=sign,
                                          map_kind=cmap.kind, status=curve.status,
                                          gaits=gaits, message=curve.message))
    return family


# ---------------------------------------------------------------------------
# multi-dimensional families


@dataclass
class TaggedCurve:
    level: int
    parent: int          # index of the seed point within the previous level
    sign: int
    map_kind: str
    points: list[np.ndarray]
    status: str


@dataclass
class MultiDimResult:
    curves: list[TaggedCurve]
    seed: SingularEG
    state_dim: int

    def points_at_level(self, level: int) -> list[np.ndarray]:
        if level == 0:
            return [self.seed.point.vector]
        return [p for c in self.curves if c.level == level for p in c.points]

    def slice_points(self, mu_index: int, value: float, tol: float = 1e-8) -> list[np.ndarray]:
        """All computed points whose control ``mu_index`` equals ``value``."""
        out = []
        for c in self.curves:
            for p in c.points:
                if abs(p[self.state_dim + 1 + mu_index] - value) <= tol:
                    out.append(p)
        return out


def multi_dim(model: HybridModel, seed: SingularEG, d: int, count: int = 250,
              h: float = 0.05, inner_count: int | None = None,
              rtol: float = hybrid.RTOL_DEFAULT, atol: float = hybrid.ATOL_DEFAULT,
              tol: float = CORRECTOR_TOL) -> MultiDimResult:
    """Recursive curve-union construction of a d-dimensional gait family.

    Level 1 traces the constant-control slice from the singular seed; level
    ``i`` re-traces every point of level ``i-1`` with the step duration and
    all but the (i-1)-th control pinned.  Per-seed step failures are
    recorded, not fatal.
    """
    if not 0 <= d <= model.k + 1:
        raise InputError(f"family dimension must lie in [0, {model.k + 1}], got {d}")
    result = MultiDimResult(curves=[], seed=seed, state_dim=model.state_dim)
    if d == 0:
        return result
    if seed.trace_direction is None:
        raise NoTangentError("seed has no usable branch direction")
    level_pts = [seed.point.vector]
    for level in range(1, d + 1):
        next_pts: list[np.ndarray] = []
        for parent, vec in enumerate(level_pts):
            n_here = count if level == 1 else (inner_count or count)
            if level == 1:
                cmap = constant_control_map(model, seed.point.mu, rtol=rtol, atol=atol)
                directions = [seed.trace_direction]
            else:
                free = level - 2
                cmap = fixed_time_map(model, free, vec[model.state_dim],
                                      vec[model.state_dim + 1:], rtol=rtol, atol=atol)
                try:
                    directions = [tangent_vector(fd_jacobian(cmap.residual, vec))]
                except NoTangentError:
                    result.curves.append(TaggedCurve(level, parent, 0, cmap.kind,
                                                     [], "no-tangent"))
                    continue
            for direction in directions:
                for sign in (1, -1):
                    curve = cm_curve(cmap, vec, sign * direction, n_here, h, tol=tol)
                    result.curves.append(TaggedCurve(level, parent, sign, cmap.kind,
                                                     [p.copy() for p in curve.points[1:]],
                                                     curve.status))
                    next_pts.extend(curve.points[1:])
        # Seeds of the next level: the union so far (level 1 keeps the
        # singular gait itself as a seed).
        level_pts = ([seed.point.vector] + next_pts) if level == 1 else next_pts
    return result
