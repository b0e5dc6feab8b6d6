"""Constrained rigid-body dynamics and plastic-impact evaluation.

A :class:`HybridModel` bundles the callbacks a biped model must provide:
mass matrix, bias forces, contact and virtual-constraint blocks, the impact
system and the coordinate-flip operator.  The operations here assemble and
solve the stacked continuous-dynamics system

    M(q) qdd + b(q, qd) = Jp(q)^T lam + B(q) u
    Jp(q) qdd + Jp_dot(q) qd = 0
    Jv(q) qdd + Jv_dot(q) qd = -v(q, qd)

and the plastic-impact system

    M(q) (qd_plus - qd) = Ji(q)^T iota,   Ji(q) qd_plus = 0.

Models whose contact pin is eliminated by the choice of coordinates supply
identically-zero contact rows; the solver then reports the physical reaction
force through the model's ``reaction_fn`` diagnostic instead of the
(vacuous) multiplier of the zero rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InputError, SingularDynamicsError, SingularImpactError
from .linalg import pinv_solve

SOLVE_TOL = 1e-10


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class RobotState:
    """Configuration and velocity of an n-degree-of-freedom model."""

    q: np.ndarray
    qdot: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        object.__setattr__(self, "qdot", np.asarray(self.qdot, dtype=float))
        if self.q.shape != self.qdot.shape:
            raise InputError(
                f"q and qdot must have equal length, got {self.q.shape} and {self.qdot.shape}")
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.qdot))):
            raise InputError("robot state contains non-finite entries")

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.q, self.qdot])

    @classmethod
    def from_vector(cls, x: np.ndarray) -> "RobotState":
        x = np.asarray(x, dtype=float)
        n = x.shape[0] // 2
        return cls(x[:n], x[n:])


@dataclass
class DynamicsEvaluation:
    """Solution of the stacked continuous-dynamics system at one state."""

    qddot: np.ndarray
    lam: np.ndarray
    u: np.ndarray
    rank: int
    solve_residual: float


@dataclass
class ImpactEvaluation:
    """Post-impact velocity and generalized impulse of a plastic impact."""

    qdot_plus: np.ndarray
    impulse: np.ndarray
    qdot_plus_full: np.ndarray
    kinetic_pre: float
    kinetic_post: float


@dataclass
class ImpactSystem:
    """Impact-space matrices supplied by a model.

    ``mass`` and ``contact_jacobian`` live in the model's impact coordinates
    (a floating parameterization for pinned models), ``v_pre`` is the
    pre-impact velocity lifted into those coordinates, and ``extract`` maps
    the solved impact-space velocity back to the model's n coordinates.
    """

    mass: np.ndarray
    contact_jacobian: np.ndarray
    v_pre: np.ndarray
    extract: np.ndarray


@dataclass
class VhcSpec:
    """One virtual constraint: joint ``joint_index`` tracks a Bezier curve
    in the normalized step phase, stabilized by a PD law with gains
    ``kp``/``kd`` and time-scale parameter ``epsilon``."""

    joint_index: int
    degree: int
    coefficients: np.ndarray
    kp: float = 100.0
    kd: float = 20.0
    epsilon: float = 0.1

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.degree < 1:
            raise InputError(f"Bezier degree must be >= 1, got {self.degree}")
        if self.coefficients.shape[0] != self.degree + 1:
            raise InputError(
                f"degree {self.degree} needs {self.degree + 1} coefficients, "
                f"got {self.coefficients.shape[0]}")
        if self.epsilon <= 0:
            raise InputError("epsilon must be positive")
        if self.kp <= 0 or self.kd <= 0:
            raise InputError("PD gains must be positive")


@dataclass
class VhcController:
    """A set of virtual constraints bound to a step duration."""

    specs: list[VhcSpec]
    tau: float

    @property
    def n_v(self) -> int:
        return len(self.specs)

    def jacobian(self, n: int) -> np.ndarray:
        jac = np.zeros((self.n_v, n))
        for row, spec in enumerate(self.specs):
            jac[row, spec.joint_index] = 1.0
        return jac

    def constraint_values(self, t: float, q: np.ndarray, qdot: np.ndarray):
        """Tracking errors (e, edot) of every constraint at time ``t``."""
        theta = min(max(t / self.tau, 0.0), 1.0)
        e = np.empty(self.n_v)
        edot = np.empty(self.n_v)
        for row, spec in enumerate(self.specs):
            val, d1, _ = bezier_eval(spec, theta)
            e[row] = q[spec.joint_index] - val
            edot[row] = qdot[spec.joint_index] - d1 / self.tau
        return e, edot

    def accel_rhs(self, t: float, q: np.ndarray, qdot: np.ndarray) -> np.ndarray:
        """Required joint accelerations: curve feedforward plus PD feedback."""
        theta = min(max(t / self.tau, 0.0), 1.0)
        rhs = np.empty(self.n_v)
        for row, spec in enumerate(self.specs):
            val, d1, d2 = bezier_eval(spec, theta)
            e = q[spec.joint_index] - val
            edot = qdot[spec.joint_index] - d1 / self.tau
            v = (spec.kd / spec.epsilon) * edot + (spec.kp / spec.epsilon ** 2) * e
            rhs[row] = d2 / self.tau ** 2 - v
        return rhs


@dataclass
class HybridModel:
    """Callbacks and dimensions describing one biped model.

    ``n_p`` counts the physical contact constraints of the mechanical model
    even when the parameterization eliminates them (``phc_fn`` then returns
    zero rows and ``reaction_fn`` reports the pin force).
    """

    name: str
    n: int
    n_p: int
    n_v: int
    n_u: int
    k: int
    flip_matrix: np.ndarray
    mass_matrix_fn: Callable[[np.ndarray], np.ndarray]
    bias_fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    impact_fn: Callable[[RobotState], ImpactSystem]
    input_matrix_fn: Callable[[np.ndarray], np.ndarray] | None = None
    control_fn: Callable[[float, RobotState, np.ndarray], np.ndarray] | None = None
    phc_fn: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]] | None = None
    vhc: VhcController | None = None
    reaction_fn: Callable[[RobotState, np.ndarray, np.ndarray], np.ndarray] | None = None
    equilibria_states: list[np.ndarray] = field(default_factory=list)
    fast_flow: tuple | None = None
    energy_fn: Callable[[RobotState], float] | None = None
    swing_foot_fn: Callable[[np.ndarray], np.ndarray] | None = None
    slope_fn: Callable[[np.ndarray], float] | None = None
    params: dict = field(default_factory=dict)

    @property
    def state_dim(self) -> int:
        return 2 * self.n

    @property
    def point_dim(self) -> int:
        return 2 * self.n + 1 + self.k

    def mu_zero(self) -> np.ndarray:
        return np.zeros(self.k)


# ---------------------------------------------------------------------------
# operations


def mass_matrix(model: HybridModel, q: np.ndarray) -> np.ndarray:
    """Mass matrix at configuration ``q`` (checked symmetric)."""
    q = np.asarray(q, dtype=float)
    if q.shape != (model.n,) or not np.all(np.isfinite(q)):
        raise InputError(f"configuration must be a finite vector of length {model.n}")
    mat = np.asarray(model.mass_matrix_fn(q), dtype=float)
    asym = np.linalg.norm(mat - mat.T)
    if asym > 1e-12 * max(1.0, np.linalg.norm(mat)):
        raise SingularDynamicsError(f"model returned an asymmetric mass matrix ({asym:.2e})")
    return mat


def bias_forces(model: HybridModel, x: RobotState) -> np.ndarray:
    """Centrifugal, Coriolis and gravity forces at state ``x``."""
    return np.asarray(model.bias_fn(x.q, x.qdot), dtype=float)


def constrained_accel(model: HybridModel, x: RobotState, t: float = 0.0,
                      mu: np.ndarray | None = None) -> DynamicsEvaluation:
    """Solve the stacked dynamics for accelerations, contact forces and
    (for virtually constrained models) the enforcing inputs."""
    if mu is None:
        mu = model.mu_zero()
    n = model.n
    mat = mass_matrix(model, x.q)
    bias = bias_forces(model, x)

    solve_u = model.vhc is not None and model.n_u > 0
    n_lam = 0
    jp = jp_dot_qd = None
    if model.phc_fn is not None:
        jp, jp_dot_qd = model.phc_fn(x.q, x.qdot)
        jp = np.atleast_2d(np.asarray(jp, dtype=float))
        n_lam = jp.shape[0]
    n_vrows = model.vhc.n_v if model.vhc is not None else 0

    rows = n + n_lam + n_vrows
    cols = n + n_lam + (model.n_u if solve_u else 0)
    a = np.zeros((rows, cols))
    rhs = np.zeros(rows)

    a[:n, :n] = mat
    rhs[:n] = -bias
    if n_lam:
        a[:n, n:n + n_lam] = -jp.T
        a[n:n + n_lam, :n] = jp
        rhs[n:n + n_lam] = -np.asarray(jp_dot_qd, dtype=float)
    bmat = None
    if model.input_matrix_fn is not None and model.n_u > 0:
        bmat = np.asarray(model.input_matrix_fn(x.q), dtype=float)
        if solve_u:
            a[:n, n + n_lam:] = -bmat
        else:
            u_known = np.asarray(model.control_fn(t, x, mu), dtype=float)
            rhs[:n] += bmat @ u_known
    if n_vrows:
        a[n + n_lam:, :n] = model.vhc.jacobian(n)
        rhs[n + n_lam:] = model.vhc.accel_rhs(t, x.q, x.qdot)

    sol = pinv_solve(a, rhs)
    resid = float(np.linalg.norm(a @ sol - rhs))
    if resid > 1e-8 * (1.0 + np.linalg.norm(rhs)):
        rank = int(np.linalg.matrix_rank(a))
        raise SingularDynamicsError(
            f"stacked dynamics inconsistent at t={t} (rank {rank}, residual {resid:.2e})",
            rank=rank, time=t)

    qdd = sol[:n]
    if solve_u:
        u = sol[n + n_lam:]
    elif model.control_fn is not None:
        u = np.asarray(model.control_fn(t, x, mu), dtype=float)
    else:
        u = np.zeros(model.n_u)
    if model.reaction_fn is not None:
        lam = np.asarray(model.reaction_fn(x, qdd, u), dtype=float)
    else:
        lam = sol[n:n + n_lam]
    rank = int(np.linalg.matrix_rank(a))
    return DynamicsEvaluation(qddot=qdd, lam=lam, u=u, rank=rank, solve_residual=resid)


def impact(model: HybridModel, x: RobotState) -> ImpactEvaluation:
    """Plastic impact: impulse-momentum solve with zero post-impact contact
    velocity.  Kinetic energy cannot increase."""
    sys = model.impact_fn(x)
    mi = np.asarray(sys.mass, dtype=float)
    ji = np.atleast_2d(np.asarray(sys.contact_jacobian, dtype=float))
    v_pre = np.asarray(sys.v_pre, dtype=float)
    dim = mi.shape[0]
    n_iota = ji.shape[0]

    if n_iota:
        if np.linalg.matrix_rank(ji) < n_iota:
            raise SingularImpactError(
                "impact constraint Jacobian is rank deficient",
                rank=int(np.linalg.matrix_rank(ji)))
        kkt = np.zeros((dim + n_iota, dim + n_iota))
        kkt[:dim, :dim] = mi
        kkt[:dim, dim:] = -ji.T
        kkt[dim:, :dim] = ji
        rhs = np.concatenate([mi @ v_pre, np.zeros(n_iota)])
        try:
            sol = np.linalg.solve(kkt, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularImpactError(f"impact system singular: {exc}") from exc
        v_plus = sol[:dim]
        impulse = sol[dim:]
    else:
        v_plus = v_pre.copy()
        impulse = np.zeros(0)

    qdot_plus = np.asarray(sys.extract, dtype=float) @ v_plus
    ke_pre = 0.5 * float(v_pre @ (mi @ v_pre))
    ke_post = 0.5 * float(v_plus @ (mi @ v_plus))
    return ImpactEvaluation(qdot_plus=qdot_plus, impulse=impulse,
                            qdot_plus_full=v_plus,
                            kinetic_pre=ke_pre, kinetic_post=ke_post)


def bezier_eval(spec, theta: float):
    """Value and first two phase derivatives of a Bezier curve at ``theta``.

    ``spec`` is a :class:`VhcSpec` or a coefficient array.  The phase is only
    defined on [0, 1].
    """
    coeffs = spec.coefficients if isinstance(spec, VhcSpec) else np.asarray(spec, dtype=float)
    if not 0.0 <= theta <= 1.0:
        raise InputError(f"Bezier phase must lie in [0, 1], got {theta}")
    d = coeffs.shape[0] - 1
    if d < 0:
        raise InputError("empty coefficient vector")
    value = _de_casteljau(coeffs, theta)
    d1 = d * _de_casteljau(np.diff(coeffs), theta) if d >= 1 else 0.0
    d2 = d * (d - 1) * _de_casteljau(np.diff(coeffs, 2), theta) if d >= 2 else 0.0
    return value, d1, d2


def _de_casteljau(coeffs: np.ndarray, theta: float) -> float:
    pts = np.array(coeffs, dtype=float)
    for _ in range(pts.shape[0] - 1):
        pts = (1.0 - theta) * pts[:-1] + theta * pts[1:]
    return float(pts[0])


def vhc_boundary_coefficients(q_start: float, qd_start: float,
                              q_end: float, qd_end: float,
                              tau: float, degree: int):
    """Boundary Bezier coefficients pinning a virtually constrained joint to
    given start/end positions and velocities over a step of duration ``tau``.

    Uses the Bernstein endpoint identities: the curve starts at the first
    coefficient and the phase derivative there is degree * (a1 - a0), so a
    joint velocity qd maps to a coefficient gap tau * qd / degree.
    """
    if degree < 3:
        raise InputError("need degree >= 3 to pin both endpoint positions and velocities")
    a0 = q_start
    a1 = q_start + tau * qd_start / degree
    a_last = q_end
    a_prev = q_end - tau * qd_end / degree
    return a0, a1, a_prev, a_last


def total_energy(model: HybridModel, x: RobotState) -> float:
    """Kinetic plus potential energy, when the model defines it."""
    if model.energy_fn is None:
        raise InputError(f"model {model.name} does not define an energy function")
    return float(model.energy_fn(x))
