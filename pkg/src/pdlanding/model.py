"""
Vehicle model, constraint geometry and the two translational dynamics.

State vector layout (n=7) used by every integrator in the package::

    X = [x, y, z, vx, vy, vz, m]

The frame is inertial with ``e_z`` pointing up and the landing site at the
origin. Gravity is ``(0, 0, -g0)``.

Two dynamic models are supported:

* vacuum::

      r' = v,  v' = (T/m) u - g,  m' = -q |u|

* constant-pressure atmosphere, where the nozzle back-pressure ``sigma``
  removes a constant force along the thrust axis::

      v' = (T - sigma/|u|) u/m - g

Setting ``sigma = 0`` in the second model recovers the first one exactly.
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

E_Z = np.array([0.0, 0.0, 1.0])

COSTS = ("min_fuel", "max_final_mass", "min_time")


class ModelError(ValueError):
    """Invalid model input (violated invariant or undefined evaluation)."""


def _finite(name, value):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ModelError(f"{name} is not finite: {value!r}")
    return arr


@dataclass(frozen=True)
class VehicleParams:
    """
    Physical constants of the lander.

    Attributes
    ----------
    thrust_max : float
        Maximal thrust T [N].
    flow_rate : float
        Maximal mass flow rate q [kg/s]. Zero gives a constant-mass vehicle.
    mass_empty : float
        Dry mass m_e [kg].
    gravity : float
        Gravitational acceleration g0 [m/s^2].
    throttle_min, throttle_max : float
        Bounds on the thrust norm, as a fraction of ``thrust_max``.
    pressure_term : float
        Back-pressure force sigma [N]; 0 for vacuum.
    """

    thrust_max: float
    flow_rate: float
    mass_empty: float
    gravity: float
    throttle_min: float
    throttle_max: float
    pressure_term: float = 0.0

    def __post_init__(self):
        for name in ("thrust_max", "flow_rate", "mass_empty", "gravity",
                     "throttle_min", "throttle_max", "pressure_term"):
            _finite(name, getattr(self, name))
        if not 0.0 < self.throttle_min <= self.throttle_max <= 1.0:
            raise ModelError(
                "throttle bounds must satisfy 0 < throttle_min <= throttle_max <= 1, "
                f"got [{self.throttle_min}, {self.throttle_max}]")
        if self.thrust_max <= 0.0:
            raise ModelError("thrust_max must be positive")
        if self.mass_empty <= 0.0:
            raise ModelError("mass_empty must be positive")
        if self.gravity <= 0.0:
            raise ModelError("gravity must be positive")
        if self.flow_rate < 0.0:
            raise ModelError("flow_rate must be nonnegative")
        if self.pressure_term < 0.0:
            raise ModelError("pressure_term must be nonnegative")
        if self.pressure_term > 0.0 and self.thrust_max * self.throttle_min < self.pressure_term:
            raise ModelError(
                "net thrust must stay positive: "
                f"thrust_max*throttle_min = {self.thrust_max * self.throttle_min:g} "
                f"< pressure_term = {self.pressure_term:g}")

    @property
    def model(self) -> str:
        return "atmosphere" if self.pressure_term > 0.0 else "vacuum"


@dataclass(frozen=True)
class ConstraintSet:
    """Pointing cone (half-angle theta) and glide-slope cone (angle gamma), radians."""

    pointing_half_angle: float = 0.0
    glide_slope_angle: float = 0.0
    glide_slope_enabled: bool = False
    pointing_enabled: bool = False

    def __post_init__(self):
        for name in ("pointing_half_angle", "glide_slope_angle"):
            value = float(_finite(name, getattr(self, name)))
            if not 0.0 <= value < np.pi / 2:
                raise ModelError(f"{name} must lie in [0, pi/2), got {value}")


@dataclass(frozen=True)
class State:
    position: np.ndarray
    velocity: np.ndarray
    mass: float

    def __post_init__(self):
        object.__setattr__(self, "position", _finite("position", self.position).reshape(3))
        object.__setattr__(self, "velocity", _finite("velocity", self.velocity).reshape(3))
        object.__setattr__(self, "mass", float(_finite("mass", self.mass)))

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.position, self.velocity, [self.mass]])

    @classmethod
    def from_array(cls, y) -> "State":
        y = np.asarray(y, dtype=float)
        return cls(y[0:3], y[3:6], y[6])


@dataclass(frozen=True)
class Control:
    """Thrust command stored as a unit direction and a throttle level."""

    direction: np.ndarray
    throttle: float

    def __post_init__(self):
        object.__setattr__(self, "direction", _finite("direction", self.direction).reshape(3))
        object.__setattr__(self, "throttle", float(_finite("throttle", self.throttle)))

    @property
    def vector(self) -> np.ndarray:
        return self.throttle * self.direction

    def check(self, params: VehicleParams, constraints: Optional[ConstraintSet] = None,
              tol: float = 1e-12):
        """Raise ``ModelError`` if the control leaves the admissible set."""
        if abs(np.linalg.norm(self.direction) - 1.0) > tol:
            raise ModelError(f"direction is not unit: |d| = {np.linalg.norm(self.direction)!r}")
        if not (params.throttle_min - tol <= self.throttle <= params.throttle_max + tol):
            raise ModelError(
                f"throttle {self.throttle} outside [{params.throttle_min}, {params.throttle_max}]")
        if constraints is not None and constraints.pointing_enabled:
            if self.direction[2] < np.cos(constraints.pointing_half_angle) - 1e-9:
                raise ModelError("direction outside the pointing cone")


@dataclass(frozen=True)
class Scenario:
    """
    One landing problem instance.

    ``final_position_xy`` set to a 2-vector gives the pinpoint problem, with
    the full final velocity fixed as well. ``None`` leaves the horizontal
    final position and velocity free, so only ``(z, vz)(t_f) = (0, 0)`` is
    imposed. ``final_time`` is ``None`` for a free final time.
    """

    params: VehicleParams
    constraints: ConstraintSet
    initial_state: State
    final_position_xy: Optional[np.ndarray] = field(default_factory=lambda: np.zeros(2))
    cost: str = "min_fuel"
    final_time: Optional[float] = None
    final_altitude: float = 0.0

    def __post_init__(self):
        if self.cost not in COSTS:
            raise ModelError(f"unknown cost {self.cost!r}; expected one of {COSTS}")
        if self.final_position_xy is not None:
            object.__setattr__(self, "final_position_xy",
                               _finite("final_position_xy", self.final_position_xy).reshape(2))
        if self.final_time is not None and not self.final_time > 0.0:
            raise ModelError("final_time must be positive when fixed")
        if self.final_altitude != 0.0:
            raise ModelError("final altitude is always 0")
        if self.initial_state.mass <= self.params.mass_empty:
            raise ModelError("initial mass must exceed mass_empty")
        if self.params.pressure_term > 0.0 and (
                self.constraints.pointing_enabled or self.constraints.glide_slope_enabled):
            raise ModelError("the atmosphere model supports neither pointing nor glide-slope constraints")
        if self.constraints.glide_slope_enabled:
            h, _ = glide_slope(self.initial_state.position, self.constraints.glide_slope_angle,
                               need_gradient=False)
            if h < 0.0:
                raise ModelError(f"initial position violates the glide slope (h = {h:g} m)")

    @property
    def pinpoint(self) -> bool:
        return self.final_position_xy is not None

    @property
    def final_velocity(self) -> np.ndarray:
        return np.zeros(3)

    @property
    def model(self) -> str:
        return self.params.model

    def replace(self, **changes) -> "Scenario":
        from dataclasses import replace
        return replace(self, **changes)


def eval_dynamics(state: State, control: Control, params: VehicleParams) -> np.ndarray:
    """
    Time derivative of the state, ``(r', v', m')`` as a 7-vector.

    Uses the atmosphere form ``(T - sigma/|u|) u/m - g`` for the velocity,
    which is the vacuum form when ``sigma = 0``.
    """
    if state.mass <= 0.0:
        raise ModelError("mass must be positive")
    if params.pressure_term > 0.0 and control.throttle == 0.0:
        raise ModelError("zero throttle with a positive pressure term")
    return dynamics_rhs(state.as_array(), control.direction, control.throttle, params)


def dynamics_rhs(y: np.ndarray, direction: np.ndarray, throttle: float,
                 params: VehicleParams) -> np.ndarray:
    """Array form of :func:`eval_dynamics` (no input validation)."""
    m = y[6]
    force = params.thrust_max * throttle - params.pressure_term
    out = np.empty(7)
    out[0:3] = y[3:6]
    out[3:6] = (force / m) * direction
    out[5] -= params.gravity
    out[6] = -params.flow_rate * throttle
    return out


def glide_slope(position, gamma: float, need_gradient: bool = True) -> Tuple[float, Optional[np.ndarray]]:
    """
    Glide-slope function ``h = z - tan(gamma) |(x, y)|`` and its gradient.

    For ``gamma = 0`` the gradient is the constant ``e_z``. For ``gamma > 0``
    the gradient is undefined at the cone apex and a ``ModelError`` is raised
    there (unless ``need_gradient`` is false).
    """
    r = _finite("position", position).reshape(3)
    if gamma == 0.0:
        return float(r[2]), (E_Z.copy() if need_gradient else None)
    tg = np.tan(gamma)
    rho = np.hypot(r[0], r[1])
    h = float(r[2] - tg * rho)
    if not need_gradient:
        return h, None
    if rho == 0.0:
        raise ModelError("glide-slope gradient undefined at cone apex (x, y) = (0, 0)")
    n = np.array([-tg * r[0] / rho, -tg * r[1] / rho, 1.0])
    return h, n


def in_pointing_cone(u, theta: float, tol: float = 0.0) -> bool:
    """True iff ``<e_z, u> >= |u| cos(theta) - tol``."""
    u = np.asarray(u, dtype=float)
    return bool(u[2] >= np.linalg.norm(u) * np.cos(theta) - tol)


def hover_throttle(mass: float, params: VehicleParams) -> float:
    """Throttle giving zero net vertical acceleration with vertical thrust."""
    return (mass * params.gravity + params.pressure_term) / params.thrust_max


# Mars lander of the numerical experiments (2-D, y = 0).
MARS_VEHICLE = dict(thrust_max=16573.0, mass_empty=1505.0, gravity=3.71,
                    throttle_min=0.3, throttle_max=0.8)
MARS_FLOW_RATE = 8.4294
MARS_INITIAL = dict(position=[2000.0, 0.0, 1500.0], velocity=[100.0, 0.0, -75.0], mass=1905.0)


def mars_scenario(flow_rate: float = 0.0, glide_slope_deg: Optional[float] = None,
                  pointing_deg: Optional[float] = None, cost: Optional[str] = None,
                  pressure_term: float = 0.0) -> Scenario:
    """
    Build one of the Mars descent scenarios.

    ``None`` for an angle disables the corresponding constraint. The cost
    defaults to min-fuel for the constant-mass vehicle and to final-mass
    maximization otherwise.
    """
    params = VehicleParams(flow_rate=flow_rate, pressure_term=pressure_term, **MARS_VEHICLE)
    constraints = ConstraintSet(
        pointing_half_angle=np.deg2rad(pointing_deg or 0.0),
        glide_slope_angle=np.deg2rad(glide_slope_deg or 0.0),
        glide_slope_enabled=glide_slope_deg is not None,
        pointing_enabled=pointing_deg is not None,
    )
    if cost is None:
        cost = "min_fuel" if flow_rate == 0.0 else "max_final_mass"
    return Scenario(params, constraints, State(**MARS_INITIAL), np.zeros(2), cost)


def vertical_scenario(z0: float = 1500.0, vz0: float = -75.0, flow_rate: float = 0.0,
                      pressure_term: float = 0.0, cost: str = "min_fuel") -> Scenario:
    """One-dimensional vertical descent with the Mars vehicle."""
    params = VehicleParams(flow_rate=flow_rate, pressure_term=pressure_term, **MARS_VEHICLE)
    state = State([0.0, 0.0, z0], [0.0, 0.0, vz0], MARS_INITIAL["mass"])
    return Scenario(params, ConstraintSet(), state, np.zeros(2), cost)
