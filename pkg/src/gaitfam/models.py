"""Shipped biped models.

The main model is the planar compass-gait walker: two identical legs with
point masses and a hip mass, walking on an implicit surface whose incline is
determined by the pre-impact configuration.  It comes in two
parameterizations:

* ``minimal``: absolute leg angles with the stance pin eliminated, the
  representation used by the continuation pipeline;
* ``floating``: hip position plus leg angles with the pin kept as an
  explicit contact constraint, used to cross-check the minimal dynamics.

``decoupled_double`` is a deliberately degenerate diagnostic model with a
free coordinate, useful for exercising the scan failure classification.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import HybridModel, ImpactSystem, RobotState
from .errors import InputError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class CompassGaitParams:
    """Physical parameters: leg mass, hip mass, segment lengths, gravity.

    ``a`` is the distance from foot to leg center of mass and ``b`` the
    remaining distance to the hip.  Defaults give the classic mass ratio 2,
    unit leg length and m * (a+b)^2 = 1, so the actuation amplitude is
    reported per unit of that inertia scale.
    """

    m: float = 1.0
    m_h: float = 2.0
    a: float = 0.5
    b: float = 0.5
    g: float = 9.81

    def __post_init__(self):
        for name in ("m", "m_h", "a", "b", "g"):
            if getattr(self, name) <= 0:
                raise InputError(f"compass-gait parameter {name} must be positive")

    @property
    def leg_length(self) -> float:
        return self.a + self.b


@dataclass(frozen=True)
class ActuationSpec:
    """Sinusoidal hip-torque actuation u(t) = mu0 * sin(omega * t)."""

    amplitude_index: int = 0
    omega: float = TWO_PI


def _impact_matrices(p: CompassGaitParams, q1: float, q2: float):
    """Free (unpinned) mass matrix in hip coordinates and the landing-foot
    contact Jacobian.  Coordinate order: hip x, hip y, leg angles."""
    ell = p.leg_length
    mt = p.m_h + 2.0 * p.m
    mb = p.m * p.b
    c1, s1 = math.cos(q1), math.sin(q1)
    c2, s2 = math.cos(q2), math.sin(q2)
    mass = np.array([
        [mt, 0.0, -mb * c1, -mb * c2],
        [0.0, mt, mb * s1, mb * s2],
        [-mb * c1, mb * s1, p.m * p.b ** 2, 0.0],
        [-mb * c2, mb * s2, 0.0, p.m * p.b ** 2],
    ])
    contact = np.array([
        [1.0, 0.0, 0.0, -ell * c2],
        [0.0, 1.0, 0.0, ell * s2],
    ])
    return mass, contact


def compass_gait(params: CompassGaitParams | None = None, actuated: bool = False,
                 representation: str = "minimal",
                 actuation: ActuationSpec | None = None,
                 baumgarte: tuple[float, float] | None = None) -> HybridModel:
    """Build the compass-gait walker.

    The passive model has no inputs and no virtual constraints; the actuated
    variant adds one hip motor driving the swing leg relative to the stance
    leg with a sinusoidal torque whose amplitude is the single control
    parameter.
    """
    p = params or CompassGaitParams()
    act = actuation or ActuationSpec()
    if representation == "minimal":
        return _compass_minimal(p, actuated, act)
    if representation == "floating":
        return _compass_floating(p, actuated, act, baumgarte)
    raise InputError(f"unknown representation '{representation}'")


def _compass_minimal(p: CompassGaitParams, actuated: bool, act: ActuationSpec) -> HybridModel:
    ell = p.leg_length
    ca = p.m * p.a ** 2 + (p.m_h + p.m) * ell ** 2
    cb = p.m * p.b ** 2
    mlb = p.m * ell * p.b
    g1 = (p.m * p.a + (p.m_h + p.m) * ell) * p.g
    g2 = p.m * p.b * p.g
    mt = p.m_h + 2.0 * p.m
    bu1, bu2 = -1.0, 1.0

    def mass_matrix_fn(q):
        m12 = -mlb * math.cos(q[0] - q[1])
        return np.array([[ca, m12], [m12, cb]])

    def bias_fn(q, qd):
        s12 = math.sin(q[0] - q[1])
        return np.array([
            -mlb * s12 * qd[1] ** 2 - g1 * math.sin(q[0]),
            mlb * s12 * qd[0] ** 2 + g2 * math.sin(q[1]),
        ])

    def impact_fn(x: RobotState) -> ImpactSystem:
        q1, q2 = x.q
        mass, contact = _impact_matrices(p, q1, q2)
        # Lift the pinned state: hip velocity follows the support leg.
        v_pre = np.array([
            ell * math.cos(q1) * x.qdot[0],
            -ell * math.sin(q1) * x.qdot[0],
            x.qdot[0],
            x.qdot[1],
        ])
        extract = np.array([[0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]])
        return ImpactSystem(mass=mass, contact_jacobian=contact,
                            v_pre=v_pre, extract=extract)

    def reaction_fn(x: RobotState, qdd, u):
        # Pivot force from the rate of change of total linear momentum.
        q1, q2 = x.q
        w1, w2 = x.qdot
        up1 = np.array([math.cos(q1), -math.sin(q1)])
        uv1 = np.array([math.sin(q1), math.cos(q1)])
        up2 = np.array([math.cos(q2), -math.sin(q2)])
        uv2 = np.array([math.sin(q2), math.cos(q2)])
        mom_rate = (g1 / p.g) * (up1 * qdd[0] - uv1 * w1 ** 2) \
            - (g2 / p.g) * (up2 * qdd[1] - uv2 * w2 ** 2)
        return mom_rate + np.array([0.0, mt * p.g])

    def energy_fn(x: RobotState) -> float:
        kin = 0.5 * float(x.qdot @ (mass_matrix_fn(x.q) @ x.qdot))
        pot = g1 * math.cos(x.q[0]) - g2 * math.cos(x.q[1])
        return kin + pot

    def swing_foot_fn(q):
        return ell * np.array([
            math.sin(q[0]) - math.sin(q[1]),
            math.cos(q[0]) - math.cos(q[1]),
        ])

    def phc_fn(q, qd):
        # Stance pin eliminated by the coordinates: constraint rows vanish.
        return np.zeros((2, 2)), np.zeros(2)

    flip = np.zeros((4, 4))
    flip[0, 1] = flip[1, 0] = flip[2, 3] = flip[3, 2] = 1.0

    n_u = 1 if actuated else 0
    k = 1 if actuated else 0
    input_matrix_fn = None
    control_fn = None
    fast = ("compass", ca, cb, mlb, g1, g2, 0.0, 0.0, act.omega)
    if actuated:
        # The control parameter is the torque amplitude per unit of
        # swing-leg hip inertia m*b^2, so the physical hip torque is
        # mu0 * m * b^2 * sin(omega * t).
        scale = cb
        bmat = np.array([[bu1 * scale], [bu2 * scale]])
        input_matrix_fn = lambda q: bmat
        control_fn = lambda t, x, mu: np.array([mu[act.amplitude_index]
                                                * math.sin(act.omega * t)])
        fast = ("compass", ca, cb, mlb, g1, g2, bu1 * scale, bu2 * scale, act.omega)

    return HybridModel(
        name="compass_gait_actuated" if actuated else "compass_gait",
        n=2, n_p=2, n_v=0, n_u=n_u, k=k,
        flip_matrix=flip,
        mass_matrix_fn=mass_matrix_fn,
        bias_fn=bias_fn,
        impact_fn=impact_fn,
        input_matrix_fn=input_matrix_fn,
        control_fn=control_fn,
        phc_fn=phc_fn,
        reaction_fn=reaction_fn,
        equilibria_states=[np.zeros(4), np.array([math.pi, math.pi, 0.0, 0.0])],
        fast_flow=fast,
        energy_fn=energy_fn,
        swing_foot_fn=swing_foot_fn,
        slope_fn=lambda q: 0.5 * (q[0] + q[1]),
        params={
            "model": "compass_gait",
            "masses": {"leg": p.m, "hip": p.m_h},
            "lengths": {"a": p.a, "b": p.b},
            "gravity": p.g,
            "actuated": actuated,
            "omega": act.omega,
            "representation": "minimal",
        },
    )


def _compass_floating(p: CompassGaitParams, actuated: bool, act: ActuationSpec,
                      baumgarte: tuple[float, float] | None) -> HybridModel:
    """Hip-coordinate parameterization with the stance pin as an explicit
    contact constraint.  Dynamics-level cross-check for the minimal model."""
    ell = p.leg_length
    mt = p.m_h + 2.0 * p.m
    mb = p.m * p.b
    kp, kd = baumgarte if baumgarte is not None else (0.0, 0.0)

    def mass_matrix_fn(q):
        mass, _ = _impact_matrices(p, q[2], q[3])
        return mass

    def bias_fn(q, qd):
        s1, c1 = math.sin(q[2]), math.cos(q[2])
        s2, c2 = math.sin(q[3]), math.cos(q[3])
        return np.array([
            mb * (s1 * qd[2] ** 2 + s2 * qd[3] ** 2),
            mb * (c1 * qd[2] ** 2 + c2 * qd[3] ** 2) + mt * p.g,
            p.m * p.g * p.b * s1,
            p.m * p.g * p.b * s2,
        ])

    def foot1(q):
        return np.array([q[0] - ell * math.sin(q[2]), q[1] - ell * math.cos(q[2])])

    def phc_fn(q, qd):
        c1, s1 = math.cos(q[2]), math.sin(q[2])
        jp = np.array([
            [1.0, 0.0, -ell * c1, 0.0],
            [0.0, 1.0, ell * s1, 0.0],
        ])
        jdot_qd = ell * qd[2] ** 2 * np.array([s1, c1])
        if kp or kd:
            jdot_qd = jdot_qd + kd * (jp @ qd) + kp * foot1(q)
        return jp, jdot_qd

    def impact_fn(x: RobotState) -> ImpactSystem:
        mass, contact = _impact_matrices(p, x.q[2], x.q[3])
        return ImpactSystem(mass=mass, contact_jacobian=contact,
                            v_pre=x.qdot.copy(), extract=np.eye(4))

    def energy_fn(x: RobotState) -> float:
        kin = 0.5 * float(x.qdot @ (mass_matrix_fn(x.q) @ x.qdot))
        pot = mt * p.g * x.q[1] - p.m * p.g * p.b * (math.cos(x.q[2]) + math.cos(x.q[3]))
        return kin + pot

    flip = np.zeros((8, 8))
    for i, j in ((0, 0), (1, 1), (2, 3), (3, 2)):
        flip[i, j] = 1.0
        flip[i + 4, j + 4] = 1.0

    n_u = 1 if actuated else 0
    input_matrix_fn = None
    control_fn = None
    if actuated:
        # Same amplitude unit as the minimal model: torque per m*b^2.
        bmat = p.m * p.b ** 2 * np.array([[0.0], [0.0], [-1.0], [1.0]])
        input_matrix_fn = lambda q: bmat
        control_fn = lambda t, x, mu: np.array([mu[act.amplitude_index]
                                                * math.sin(act.omega * t)])

    return HybridModel(
        name="compass_gait_floating",
        n=4, n_p=2, n_v=0, n_u=n_u, k=1 if actuated else 0,
        flip_matrix=flip,
        mass_matrix_fn=mass_matrix_fn,
        bias_fn=bias_fn,
        impact_fn=impact_fn,
        input_matrix_fn=input_matrix_fn,
        control_fn=control_fn,
        phc_fn=phc_fn,
        equilibria_states=[np.array([0.0, ell, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])],
        energy_fn=energy_fn,
        params={
            "model": "compass_gait",
            "masses": {"leg": p.m, "hip": p.m_h},
            "lengths": {"a": p.a, "b": p.b},
            "gravity": p.g,
            "actuated": actuated,
            "omega": act.omega,
            "representation": "floating",
        },
    )


def decoupled_double(omega0: float = 3.0) -> HybridModel:
    """Two uncoupled coordinates: a hanging pendulum and a free particle.

    The free coordinate makes the rest set of the model more than
    one-dimensional, so the singular-gait indicator vanishes identically.
    Shipped as a diagnostic demonstration model.
    """

    def mass_matrix_fn(q):
        return np.eye(2)

    def bias_fn(q, qd):
        return np.array([omega0 ** 2 * math.sin(q[0]), 0.0])

    def impact_fn(x: RobotState) -> ImpactSystem:
        return ImpactSystem(mass=np.eye(2), contact_jacobian=np.zeros((0, 2)),
                            v_pre=x.qdot.copy(), extract=np.eye(2))

    return HybridModel(
        name="decoupled_double",
        n=2, n_p=0, n_v=0, n_u=0, k=0,
        flip_matrix=np.eye(4),
        mass_matrix_fn=mass_matrix_fn,
        bias_fn=bias_fn,
        impact_fn=impact_fn,
        equilibria_states=[np.zeros(4)],
        energy_fn=lambda x: 0.5 * float(x.qdot @ x.qdot)
        - omega0 ** 2 * math.cos(x.q[0]),
        params={"model": "decoupled_double", "omega0": omega0},
    )


# ---------------------------------------------------------------------------
# derived quantities


def slope(model: HybridModel, c) -> float:
    """Implicit walking-surface angle of the gait point ``c`` (radians)."""
    if model.slope_fn is None:
        raise InputError(f"model {model.name} does not define a walking slope")
    return float(model.slope_fn(np.asarray(c.x0.q, dtype=float)))


def equilibria(model: HybridModel) -> list[RobotState]:
    """Rest states of the model that are fixed points of the flip operator."""
    return [RobotState.from_vector(x) for x in model.equilibria_states]


def swing_foot_height(model: HybridModel, x: RobotState, sigma: float | None = None) -> float:
    """Signed height of the swing foot above the walking surface.

    ``sigma`` is the surface angle; by default it is taken from the
    configuration itself, which is exact at pre-impact states.
    """
    if model.swing_foot_fn is None:
        raise InputError(f"model {model.name} does not define a swing foot")
    if sigma is None:
        sigma = float(model.slope_fn(x.q))
    foot = model.swing_foot_fn(x.q)
    normal = np.array([math.sin(sigma), math.cos(sigma)])
    return float(foot @ normal)


def step_length(model: HybridModel, c) -> float:
    """Distance between the two foot contact points at the pre-impact state."""
    if model.swing_foot_fn is None:
        raise InputError(f"model {model.name} does not define a swing foot")
    return float(np.linalg.norm(model.swing_foot_fn(np.asarray(c.x0.q, dtype=float))))


def average_velocity(model: HybridModel, c) -> float:
    """Step length divided by step duration."""
    return step_length(model, c) / c.tau


# ---------------------------------------------------------------------------
# configuration files


def from_config_dict(cfg: dict) -> HybridModel:
    kind = cfg.get("model")
    if kind == "compass_gait":
        masses = cfg.get("masses", {})
        lengths = cfg.get("lengths", {})
        params = CompassGaitParams(
            m=float(masses.get("leg", 1.0)),
            m_h=float(masses.get("hip", 2.0)),
            a=float(lengths.get("a", 0.5)),
            b=float(lengths.get("b", 0.5)),
            g=float(cfg.get("gravity", 9.81)),
        )
        act = ActuationSpec(omega=float(cfg.get("omega", TWO_PI)))
        gains = cfg.get("gains")
        baumgarte = None
        if gains is not None:
            baumgarte = (float(gains.get("kp", 0.0)), float(gains.get("kd", 0.0)))
        return compass_gait(params,
                            actuated=bool(cfg.get("actuated", False)),
                            representation=cfg.get("representation", "minimal"),
                            actuation=act,
                            baumgarte=baumgarte)
    if kind == "decoupled_double":
        return decoupled_double(omega0=float(cfg.get("omega0", 3.0)))
    raise InputError(f"unknown model kind {kind!r}")


def load_model_config(path) -> HybridModel:
    """Build a model from a JSON configuration file.

    Recognized keys: ``model``, ``masses`` (leg, hip), ``lengths`` (a, b),
    ``gravity``, ``actuated``, ``omega``, ``gains`` (kp, kd),
    ``representation``.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read model config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise InputError(f"model config {path} must contain a JSON object")
    return from_config_dict(cfg)
