"""Gait-space queries through a global homotopy.

A query is a list of constraints on derived quantities (surface incline,
step length, walking speed, foot clearance).  The reference gait ``a`` is
deformed along the manifold of periodic gaits until the query residual
vanishes; the scalar homotopy parameter p measures the remaining fraction of
the reference's query residual, so p(a) = 1 and p = 0 at a solution.

Inequality constraints enter through nonnegative slack variables appended to
the continuation vector and enforced as box constraints by the projected
corrector; path constraints enter through the integral of the negative part
of a quantity along the step, which is zero exactly when the quantity stays
nonnegative.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import dp45, hybrid, models
from .continuation import BoxBounds, ContinuationMap, cm_step, projected_newton
from .dynamics import HybridModel, RobotState
from .errors import (DegenerateReferenceError, InputError, NoTangentError,
                     StalledDescentError, StepFailureError)
from .hybrid import GaitPoint
from .linalg import fd_jacobian, fd_step, nullspace

ALPHA_DEFAULT = 1e-4
BETA_DEFAULT = 0.5
P_TOL = 1e-8
LAMBDA_MIN = 1e-12
RESIDUAL_TOL = 1e-10
QUAD_TOL = 1e-9


# ---------------------------------------------------------------------------
# query constraints


@dataclass
class QueryConstraint:
    """One entry of a gait-space query.

    ``kind`` is ``"equality"`` (quantity == target), ``"slack"``
    (quantity >= target via a nonnegative slack variable, optionally driven
    to ``desired``), or ``"integral"`` (the integral of the negative part of
    a path quantity must vanish).
    """

    kind: str
    quantity: str | Callable
    target: float = 0.0
    desired: float | None = None
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("equality", "slack", "integral"):
            raise InputError(f"unknown constraint kind {self.kind!r}")
        if not self.name:
            self.name = self.quantity if isinstance(self.quantity, str) else self.kind


def _swing_clearance_profile(model: HybridModel, c: GaitPoint):
    sigma = models.slope(model, c)

    def dist(t: float, y: np.ndarray) -> float:
        return models.swing_foot_height(model, RobotState(y[:model.n], y[model.n:]),
                                        sigma=sigma)

    return dist


def min_foot_clearance(model: HybridModel, c: GaitPoint, samples: int = 61) -> float:
    """Smallest swing-foot height above the walking surface over one step."""
    dist = _swing_clearance_profile(model, c)
    ts = np.linspace(0.0, c.tau, samples)
    res = hybrid.flow(model, c, t_eval=ts)
    return min(dist(float(t), y) for t, y in zip(res.sample_t, res.sample_y))


def integral_penalty(model: HybridModel, c: GaitPoint, evaluator: Callable,
                     rtol: float = hybrid.RTOL_DEFAULT,
                     atol: float = hybrid.ATOL_DEFAULT) -> float:
    """Integral of the negative part of ``evaluator(t, state)`` along the
    step of ``c``; nonpositive, and zero exactly when the quantity stays
    nonnegative (up to quadrature tolerance)."""
    from .hybrid import _post_impact_stance_frame, _stance_rhs

    y0 = np.concatenate([_post_impact_stance_frame(model, c.x0), [0.0]])
    rhs = _stance_rhs(model, c.mu)

    def f_aug(t, y):
        base = rhs(t, y[:-1])
        pen = evaluator(t, y[:-1])
        return np.concatenate([base, [min(pen, 0.0)]])

    res = dp45.integrate(f_aug, y0, 0.0, c.tau, rtol=rtol, atol=min(atol, QUAD_TOL))
    return float(res.y[-1])


def foot_clearance_integral(model: HybridModel, c: GaitPoint) -> float:
    return integral_penalty(model, c, _swing_clearance_profile(model, c))


EVALUATORS: dict[str, Callable] = {
    "slope": models.slope,
    "step_length": models.step_length,
    "average_velocity": models.average_velocity,
    "min_foot_clearance": min_foot_clearance,
    "foot_clearance_integral": foot_clearance_integral,
}


def resolve_evaluator(quantity):
    if callable(quantity):
        return quantity
    try:
        return EVALUATORS[quantity]
    except KeyError:
        raise InputError(f"unknown query quantity {quantity!r}; "
                         f"known: {sorted(EVALUATORS)}") from None


# ---------------------------------------------------------------------------
# the homotopy problem


@dataclass
class HomotopyState:
    """Snapshot of one accepted iterate of the homotopy solve."""

    point: GaitPoint
    slacks: np.ndarray
    p: float
    merit: float
    residual_norm: float


@dataclass
class GhmResult:
    states: list[HomotopyState]
    success: bool
    root: GaitPoint | None
    message: str
    direction_residuals: list[float] = field(default_factory=list)

    @property
    def p_values(self) -> list[float]:
        return [s.p for s in self.states]

    @property
    def merits(self) -> list[float]:
        return [s.merit for s in self.states]


class GhmProblem:
    """Stacked residual [periodicity; slack definitions; deformed query] on
    the continuation vector extended with the slack variables."""

    def __init__(self, model: HybridModel, constraints: list[QueryConstraint],
                 a: GaitPoint, rtol: float = hybrid.RTOL_DEFAULT,
                 atol: float = hybrid.ATOL_DEFAULT, tau_min: float = 1e-2):
        if not constraints:
            raise InputError("a query needs at least one constraint")
        self.model = model
        self.constraints = constraints
        self.rtol, self.atol = rtol, atol
        self.tau_min = tau_min
        self.slack_cons = [q for q in constraints if q.kind == "slack"]
        self.h_cons = [q for q in constraints if q.kind in ("equality", "integral")]
        self.h_cons += [q for q in self.slack_cons if q.desired is not None]
        self.n_s = len(self.slack_cons)
        self.dim = model.point_dim + self.n_s
        self.n_h = len(self.h_cons)
        if self.n_h == 0:
            raise InputError("query has no target rows; nothing to solve for")

        self.a_vec = self._initial_vector(a)
        self.h_a = self._h(self.a_vec)
        self.h_a_sq = float(self.h_a @ self.h_a)
        if self.h_a_sq <= 0.0:
            raise DegenerateReferenceError(
                "reference gait already satisfies the query exactly; "
                "the homotopy direction is undefined")
        lower = np.full(self.dim, -np.inf)
        lower[model.point_dim:] = 0.0
        # Keep the corrector away from degenerate zero-duration steps.
        lower[model.state_dim] = tau_min
        self.bounds = BoxBounds(lower, np.full(self.dim, np.inf))

    # packing ---------------------------------------------------------------

    def gait_point(self, z: np.ndarray) -> GaitPoint:
        return GaitPoint.from_vector(z[:self.model.point_dim], self.model.n)

    def slacks(self, z: np.ndarray) -> np.ndarray:
        return z[self.model.point_dim:]

    def _initial_vector(self, a: GaitPoint) -> np.ndarray:
        s0 = []
        for q in self.slack_cons:
            val = resolve_evaluator(q.quantity)(self.model, a) - q.target
            if val < 0:
                raise InputError(
                    f"reference gait violates inequality {q.name!r} "
                    f"(value {val:.3e} below target)")
            s0.append(val)
        return np.concatenate([a.vector, s0])

    # residual pieces ---------------------------------------------------------

    def _eval(self, q: QueryConstraint, z: np.ndarray) -> float:
        return float(resolve_evaluator(q.quantity)(self.model, self.gait_point(z)))

    def _h(self, z: np.ndarray) -> np.ndarray:
        rows = []
        slack_pos = {id(q): i for i, q in enumerate(self.slack_cons)}
        for q in self.h_cons:
            if q.kind == "slack":
                rows.append(self.slacks(z)[slack_pos[id(q)]] - q.desired)
            else:
                rows.append(self._eval(q, z) - q.target)
        return np.asarray(rows, dtype=float)

    def _aux(self, z: np.ndarray) -> np.ndarray:
        rows = []
        for i, q in enumerate(self.slack_cons):
            rows.append(self._eval(q, z) - q.target - self.slacks(z)[i])
        return np.asarray(rows, dtype=float)

    def p_value(self, z: np.ndarray) -> float:
        return float(self.h_a @ self._h(z)) / self.h_a_sq

    def residual(self, z: np.ndarray) -> np.ndarray:
        c = self.gait_point(z)
        per = hybrid.periodicity(self.model, c, rtol=self.rtol, atol=self.atol).residual
        g = self._h(z) - self.p_value(z) * self.h_a
        return np.concatenate([per, self._aux(z), g])

    def as_map(self) -> ContinuationMap:
        return ContinuationMap(residual=self.residual, dim=self.dim,
                               m=self.model.state_dim + self.n_s + self.n_h,
                               kind="global-homotopy",
                               aux_spec=", ".join(q.name for q in self.constraints))


def ghm_residual(model: HybridModel, constraints: list[QueryConstraint],
                 a: GaitPoint, c: GaitPoint) -> np.ndarray:
    """Stacked periodicity and deformed-query residual at ``c`` for the
    homotopy anchored at the reference gait ``a``."""
    prob = GhmProblem(model, constraints, a)
    z = np.concatenate([c.vector, prob.slacks(prob.a_vec)])
    return prob.residual(z)


def ghm_solve(model: HybridModel, constraints: list[QueryConstraint], a: GaitPoint,
              alpha: float = ALPHA_DEFAULT, beta: float = BETA_DEFAULT,
              max_iters: int = 50, p_tol: float = P_TOL,
              residual_tol: float = RESIDUAL_TOL, lambda_min: float = LAMBDA_MIN,
              step_max: float = np.inf, rtol: float = hybrid.RTOL_DEFAULT,
              atol: float = hybrid.ATOL_DEFAULT) -> GhmResult:
    """Deform the reference gait ``a`` toward a gait satisfying the query.

    Each iterate projects a Newton step on the homotopy parameter onto the
    tangent space of the constraint manifold, walks along it under an
    Armijo line search on the merit 0.5 p^2, and corrects back onto the
    manifold, so every accepted point is itself a valid (periodic)
    trajectory.  Succeeds when |p| drops below ``p_tol``.

    ``step_max`` caps the arclength of one iterate; useful when the merit
    gradient becomes shallow and the raw Newton stride would leave the
    region where the flow is well behaved.
    """
    if not 0.0 < alpha < 0.5:
        raise InputError("alpha must lie in (0, 1/2)")
    if not 0.0 < beta < 1.0:
        raise InputError("beta must lie in (0, 1)")
    prob = GhmProblem(model, constraints, a, rtol=rtol, atol=atol)
    cmap = prob.as_map()

    z = prob.a_vec.copy()
    r0 = prob.residual(z)
    if np.linalg.norm(r0) >= residual_tol:
        res = projected_newton(prob.residual, z, bounds=prob.bounds, tol=residual_tol)
        if not res.converged:
            raise InputError(
                f"reference gait is not on the constraint manifold "
                f"(residual {res.residual_norm:.2e})")
        z = res.point

    def snapshot(zv):
        p = prob.p_value(zv)
        return HomotopyState(point=prob.gait_point(zv), slacks=prob.slacks(zv).copy(),
                             p=p, merit=0.5 * p * p,
                             residual_norm=float(np.linalg.norm(prob.residual(zv))))

    states = [snapshot(z)]
    direction_residuals: list[float] = []
    for _ in range(max_iters):
        p_c = states[-1].p
        if abs(p_c) < p_tol:
            return GhmResult(states=states, success=True, root=prob.gait_point(z),
                             message=f"homotopy parameter reduced to {p_c:.2e}",
                             direction_residuals=direction_residuals)
        jac = fd_jacobian(prob.residual, z)
        frame = nullspace(jac)
        if frame.shape[1] == 0:
            raise NoTangentError("homotopy manifold has no tangent directions")
        grad_p = _fd_gradient(prob.p_value, z)

        def newton_direction(basis):
            row = grad_p @ basis
            row_sq = float(row @ row)
            if row_sq < 1e-26:
                raise StalledDescentError(
                    "homotopy parameter is stationary along the manifold",
                    point=z, p_value=p_c)
            delta_s = -row * (p_c / row_sq)
            return basis @ delta_s

        v = newton_direction(frame)
        # When the full step would cross a box bound (slack floor, duration
        # floor) restrict the step to tangent directions that freeze those
        # coordinates, so the corrector can still follow it.
        at_bound = (((z - prob.bounds.lower <= np.abs(v)) & (v < 0))
                    | ((prob.bounds.upper - z <= np.abs(v)) & (v > 0)))
        if np.any(at_bound):
            reducer = nullspace(frame[at_bound, :])
            if reducer.shape[1] == 0:
                raise StalledDescentError(
                    "descent direction blocked by active bounds",
                    point=z, p_value=p_c)
            v = newton_direction(frame @ reducer)
        length = float(np.linalg.norm(v))
        if length < 1e-14:
            raise StalledDescentError(
                "descent direction blocked by active bounds", point=z, p_value=p_c)
        unit = v / length
        direction_residuals.append(float(np.linalg.norm(jac @ v)) / length)
        descent = p_c * float(grad_p @ v)
        if descent >= 0.0:
            raise StalledDescentError(
                "no feasible descent direction for the homotopy parameter",
                point=z, p_value=p_c)
        if length > step_max:
            descent *= step_max / length
            length = step_max

        lam = 1.0
        accepted = None
        while lam >= lambda_min:
            try:
                z_try = cm_step(cmap, z, unit, lam * length, bounds=prob.bounds,
                                tol=residual_tol)
            except (StepFailureError, RuntimeError):
                # Failed correction or a blown-up trial flow: shrink the step.
                lam *= beta
                continue
            p_try = prob.p_value(z_try)
            if 0.5 * p_try ** 2 - 0.5 * p_c ** 2 <= alpha * lam * descent:
                accepted = z_try
                break
            lam *= beta
        if accepted is None:
            raise StalledDescentError(
                f"line search stalled below {lambda_min:g} at |p| = {abs(p_c):.3e}",
                point=z, p_value=p_c)
        z = accepted
        states.append(snapshot(z))

    p_c = states[-1].p
    success = abs(p_c) < p_tol
    return GhmResult(states=states, success=success,
                     root=prob.gait_point(z) if success else None,
                     message=(f"stopped after {max_iters} iterations with "
                              f"|p| = {abs(p_c):.3e}"),
                     direction_residuals=direction_residuals)


def _fd_gradient(fun, z: np.ndarray) -> np.ndarray:
    grad = np.empty_like(z)
    for j in range(z.shape[0]):
        h = fd_step(z[j])
        zp, zm = z.copy(), z.copy()
        zp[j] += h
        zm[j] -= h
        grad[j] = (fun(zp) - fun(zm)) / (2.0 * h)
    return grad


# ---------------------------------------------------------------------------
# query files


def load_query(path) -> list[QueryConstraint]:
    """Parse a JSON query file: a list of (quantity, op, target) entries
    with op one of "=", ">=" (slack-backed) or "integral>=0"."""
    import json

    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read query file {path}: {exc}") from exc
    entries = data.get("constraints") if isinstance(data, dict) else data
    if not isinstance(entries, list):
        raise InputError("query file must hold a list of constraints")
    out = []
    for e in entries:
        op = e.get("op", "=")
        if op == "=":
            kind = "equality"
        elif op == ">=":
            kind = "slack"
        elif op == "integral>=0":
            kind = "integral"
        else:
            raise InputError(f"unknown query operator {op!r}")
        out.append(QueryConstraint(kind=kind, quantity=e["quantity"],
                                   target=float(e.get("target", 0.0)),
                                   desired=(float(e["desired"])
                                            if e.get("desired") is not None else None)))
    return out
