"""One hybrid step: impact, flow, periodicity map and its Jacobian.

A gait point bundles a pre-impact state, a step duration and the control
parameters.  One step applies the plastic impact, relabels the legs so the
new support leg occupies slot 1 (the swap is the model's flip operator),
integrates the continuous dynamics for the step duration and maps the result
back to physical labels.  A point is a period-one gait exactly when the end
state equals the flipped initial state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dp45, kernel
from .dynamics import HybridModel, RobotState, constrained_accel, impact
from .errors import InputError, SingularDynamicsError
from .linalg import fd_jacobian, fd_step, nullspace

RTOL_DEFAULT = 1e-10
ATOL_DEFAULT = 1e-12


@dataclass(frozen=True)
class GaitPoint:
    """A point (x0, tau, mu) in state-time-control space."""

    x0: RobotState
    tau: float
    mu: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu", np.atleast_1d(np.asarray(self.mu, dtype=float)))
        if not np.isfinite(self.tau) or self.tau <= 0.0:
            raise InputError(f"step duration must be positive and finite, got {self.tau}")
        if not np.all(np.isfinite(self.mu)):
            raise InputError("control parameters contain non-finite entries")

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.x0.vector, [self.tau], self.mu])

    @classmethod
    def from_vector(cls, vec: np.ndarray, n: int) -> "GaitPoint":
        vec = np.asarray(vec, dtype=float)
        return cls(RobotState(vec[:n], vec[n:2 * n]), float(vec[2 * n]), vec[2 * n + 1:])


def point_for(model: HybridModel, x0, tau: float, mu=None) -> GaitPoint:
    if mu is None:
        mu = model.mu_zero()
    x0 = x0 if isinstance(x0, RobotState) else RobotState.from_vector(np.asarray(x0, dtype=float))
    if x0.q.shape[0] != model.n:
        raise InputError(f"state has {x0.q.shape[0]} coordinates, model has {model.n}")
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    if mu.shape[0] != model.k:
        raise InputError(f"model has k={model.k} control parameters, got {mu.shape[0]}")
    return GaitPoint(x0, float(tau), mu)


@dataclass
class FlowResult:
    end_state: RobotState        # physical labels at the next pre-impact time
    end_derivative: np.ndarray   # time derivative of the end state
    nsteps: int
    sample_t: np.ndarray | None = None
    sample_y: np.ndarray | None = None  # stance-frame states along the step


@dataclass
class PeriodicityResult:
    residual: np.ndarray
    end_state: RobotState

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.residual))


@dataclass
class JacobianResult:
    jac: np.ndarray
    n: int
    k: int

    @property
    def state_block(self) -> np.ndarray:
        return self.jac[:, :2 * self.n]

    @property
    def tau_column(self) -> np.ndarray:
        return self.jac[:, 2 * self.n]

    @property
    def mu_block(self) -> np.ndarray:
        return self.jac[:, 2 * self.n + 1:]


def flip(model: HybridModel, x: RobotState) -> RobotState:
    """Left/right relabeling of a state (a linear involution)."""
    return RobotState.from_vector(model.flip_matrix @ x.vector)


def _post_impact_stance_frame(model: HybridModel, x0: RobotState) -> np.ndarray:
    """Jump at the start of the step, expressed with the new support leg in
    slot 1."""
    ev = impact(model, x0)
    x_plus = np.concatenate([x0.q, ev.qdot_plus])
    return model.flip_matrix @ x_plus


def _stance_rhs(model: HybridModel, mu: np.ndarray):
    n = model.n

    def rhs(t, y):
        state = RobotState(y[:n], y[n:])
        try:
            ev = constrained_accel(model, state, t, mu)
        except SingularDynamicsError as exc:
            exc.time = t
            raise
        return np.concatenate([y[n:], ev.qddot])

    return rhs


def flow(model: HybridModel, c: GaitPoint, rtol: float = RTOL_DEFAULT,
         atol: float = ATOL_DEFAULT, t_eval=None) -> FlowResult:
    """State after one step of duration ``c.tau`` starting from the
    pre-impact state ``c.x0`` (impact first, then continuous flow)."""
    y0 = _post_impact_stance_frame(model, c.x0)
    if model.fast_flow is not None and t_eval is None:
        mu0 = float(c.mu[0]) if model.k else 0.0
        y_end, f_end, nsteps, _ = kernel.flow_end_specialized(
            model.fast_flow, y0, c.tau, mu0, rtol, atol)
        y_end = np.array(y_end)
        f_end = np.array(f_end)
        samples = None
        ts = None
    else:
        res = dp45.integrate(_stance_rhs(model, c.mu), y0, 0.0, c.tau,
                             rtol=rtol, atol=atol, t_eval=t_eval)
        y_end, f_end, nsteps = res.y, res.f, res.nsteps
        samples, ts = res.sample_y, res.sample_t
    end_vec = model.flip_matrix @ y_end
    end_der = model.flip_matrix @ f_end
    return FlowResult(end_state=RobotState.from_vector(end_vec),
                      end_derivative=end_der, nsteps=nsteps,
                      sample_t=ts, sample_y=samples)


def periodicity(model: HybridModel, c: GaitPoint, rtol: float = RTOL_DEFAULT,
                atol: float = ATOL_DEFAULT) -> PeriodicityResult:
    """Residual between the end of one step and the flipped initial state."""
    res = flow(model, c, rtol=rtol, atol=atol)
    residual = res.end_state.vector - model.flip_matrix @ c.x0.vector
    return PeriodicityResult(residual=residual, end_state=res.end_state)


def residual_vector(model: HybridModel, vec: np.ndarray, rtol: float = RTOL_DEFAULT,
                    atol: float = ATOL_DEFAULT) -> np.ndarray:
    """Periodicity residual of a packed point vector [x0, tau, mu]."""
    c = GaitPoint.from_vector(vec, model.n)
    return periodicity(model, c, rtol=rtol, atol=atol).residual


def jacobian(model: HybridModel, c: GaitPoint, rtol: float = RTOL_DEFAULT,
             atol: float = ATOL_DEFAULT) -> JacobianResult:
    """Jacobian of the periodicity map.

    State and control columns use central differences on the full hybrid
    step; the step-duration column is exact, being the time derivative of
    the flow at the end state.
    """
    n2 = model.state_dim
    jac = np.empty((n2, model.point_dim))
    x0 = c.x0.vector
    for j in range(n2):
        h = fd_step(x0[j])
        xp, xm = x0.copy(), x0.copy()
        xp[j] += h
        xm[j] -= h
        rp = periodicity(model, GaitPoint(RobotState.from_vector(xp), c.tau, c.mu),
                         rtol=rtol, atol=atol).residual
        rm = periodicity(model, GaitPoint(RobotState.from_vector(xm), c.tau, c.mu),
                         rtol=rtol, atol=atol).residual
        jac[:, j] = (rp - rm) / (2.0 * h)
    jac[:, n2] = flow(model, c, rtol=rtol, atol=atol).end_derivative
    for j in range(model.k):
        h = fd_step(c.mu[j])
        mp, mm = c.mu.copy(), c.mu.copy()
        mp[j] += h
        mm[j] -= h
        rp = periodicity(model, GaitPoint(c.x0, c.tau, mp), rtol=rtol, atol=atol).residual
        rm = periodicity(model, GaitPoint(c.x0, c.tau, mm), rtol=rtol, atol=atol).residual
        jac[:, n2 + 1 + j] = (rp - rm) / (2.0 * h)
    return JacobianResult(jac=jac, n=model.n, k=model.k)


def state_block(model: HybridModel, c: GaitPoint, rtol: float = RTOL_DEFAULT,
                atol: float = ATOL_DEFAULT) -> np.ndarray:
    """Central-difference block of the periodicity Jacobian with respect to
    the pre-impact state only (the square block whose determinant locates
    singular equilibrium gaits)."""
    n2 = model.state_dim
    block = np.empty((n2, n2))
    x0 = c.x0.vector
    for j in range(n2):
        h = fd_step(x0[j])
        xp, xm = x0.copy(), x0.copy()
        xp[j] += h
        xm[j] -= h
        rp = periodicity(model, GaitPoint(RobotState.from_vector(xp), c.tau, c.mu),
                         rtol=rtol, atol=atol).residual
        rm = periodicity(model, GaitPoint(RobotState.from_vector(xm), c.tau, c.mu),
                         rtol=rtol, atol=atol).residual
        block[:, j] = (rp - rm) / (2.0 * h)
    return block


def tangent_basis(model: HybridModel, c: GaitPoint, cmap) -> np.ndarray:
    """Orthonormal basis (columns) of the tangent space of a continuation
    map's zero set at ``c``."""
    from .errors import NoTangentError

    jac = fd_jacobian(cmap.residual, c.vector)
    basis = nullspace(jac)
    if basis.shape[1] == 0:
        raise NoTangentError(
            f"map {cmap.kind!r} has an empty tangent space at this point")
    return basis
