"""
Maximum-principle quantities for the landing problem.

The adjoint vector is ``(p_r, p_v, p_m)``. Along a state-constrained arc the
position adjoint that enters the dynamics is the measure-adjusted
``q_r = p_r - int n dmu``; ``Costate.mu_accum`` carries the running
integral. ``p_w`` is the multiplier of the fuel accumulator used when a
running fuel cost is converted to a final cost (it is ``-1`` for the
constant-mass min-fuel problem with a normal extremal and ``0`` otherwise).
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Tuple

import numpy as np

from .model import Control, ConstraintSet, State, VehicleParams

_DEGENERATE_DELTA = np.array([1.0, 0.0])


class Branch(str, Enum):
    INTERIOR = "interior"
    CONE_BOUNDARY = "cone_boundary"
    DEGENERATE_TIE = "degenerate_tie"


class ArcHint(str, Enum):
    MAX = "max"
    MIN = "min"
    SINGULAR = "singular"


@dataclass(frozen=True)
class Costate:
    p_r: np.ndarray
    p_v: np.ndarray
    p_m: float
    p0: float = -1.0
    mu_accum: np.ndarray = field(default_factory=lambda: np.zeros(3))
    p_w: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "p_r", np.asarray(self.p_r, dtype=float).reshape(3))
        object.__setattr__(self, "p_v", np.asarray(self.p_v, dtype=float).reshape(3))
        object.__setattr__(self, "mu_accum", np.asarray(self.mu_accum, dtype=float).reshape(3))
        object.__setattr__(self, "p_m", float(self.p_m))
        object.__setattr__(self, "p_w", float(self.p_w))
        if self.p0 not in (0.0, -1.0):
            raise ValueError("p0 must be 0 or -1")

    @property
    def q_r(self) -> np.ndarray:
        return self.p_r - self.mu_accum

    def is_trivial(self) -> bool:
        """True when (P, p0, mu) vanishes, which no extremal may satisfy."""
        return (self.p0 == 0.0 and not np.any(self.p_r) and not np.any(self.p_v)
                and self.p_m == 0.0 and not np.any(self.mu_accum))

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.p_r, self.p_v, [self.p_m]])

    @classmethod
    def from_array(cls, p, **kwargs) -> "Costate":
        p = np.asarray(p, dtype=float)
        return cls(p[0:3], p[3:6], p[6], **kwargs)


@dataclass(frozen=True)
class DirectionResult:
    d: np.ndarray
    branch: Branch
    pv_norm: float


def direction_law(p_v, theta: float = 0.0, pointing_enabled: bool = False,
                  tol: float = 1e-12) -> DirectionResult:
    """
    Maximize ``<p_v, d>`` over unit vectors ``d`` in the pointing cone.

    Returns ``p_v/|p_v|`` when that vector is inside the cone, the cone
    generator closest to it otherwise, and a designated generator
    ``(sin(theta) * (1, 0), cos(theta))`` when every generator ties
    (``p_v`` vertical and pointing down, or ``p_v = 0``). Without a pointing
    constraint the tie happens only at ``p_v = 0`` and returns ``e_z``.
    """
    p_v = np.asarray(p_v, dtype=float)
    d, code, norm = _direction(p_v, theta, pointing_enabled, tol)
    return DirectionResult(d, (Branch.INTERIOR, Branch.CONE_BOUNDARY, Branch.DEGENERATE_TIE)[code], norm)


def _direction(p_v, theta, pointing_enabled, tol=1e-12):
    norm = float(np.sqrt(p_v @ p_v))
    if not pointing_enabled:
        if norm == 0.0:
            return np.array([0.0, 0.0, 1.0]), 2, norm
        return p_v / norm, 0, norm
    ct = np.cos(theta)
    if norm > 0.0 and p_v[2] >= norm * ct:
        return p_v / norm, 0, norm
    st = np.sin(theta)
    hnorm = float(np.hypot(p_v[0], p_v[1]))
    if hnorm > tol * norm:
        return np.array([st * p_v[0] / hnorm, st * p_v[1] / hnorm, ct]), 1, norm
    return np.array([st * _DEGENERATE_DELTA[0], st * _DEGENERATE_DELTA[1], ct]), 2, norm


def cone_margin(p_v, theta: float) -> float:
    """``p_vz - |p_v| cos(theta)``; its sign separates the two regular branches."""
    p_v = np.asarray(p_v, dtype=float)
    return float(p_v[2] - np.linalg.norm(p_v) * np.cos(theta))


def switching_function(state: State, costate: Costate, d, params: VehicleParams) -> float:
    """
    Throttle switching function ``(T/m) <p_v, d> - p_m q + p_w``.

    With ``d`` from :func:`direction_law` this is the coefficient of the
    throttle in the Hamiltonian for both dynamic models (in the atmosphere
    model ``d = p_v/|p_v|`` and the first term reads ``(T/m)|p_v|``).
    """
    return _psi(state.mass, costate.p_v, costate.p_m, costate.p_w, np.asarray(d, dtype=float), params)


def _psi(m, p_v, p_m, p_w, d, params):
    return params.thrust_max / m * float(p_v @ d) - p_m * params.flow_rate + p_w


def default_singular_tol(params: VehicleParams, mass: float) -> float:
    return 1e-9 * params.thrust_max / mass


def control_law(state: State, costate: Costate, constraints: ConstraintSet,
                params: VehicleParams, singular_tol=None) -> Tuple[Control, ArcHint]:
    """
    Pointwise maximizer of the Hamiltonian.

    When ``|psi| <= singular_tol`` the throttle is not determined by the
    maximization; the minimum throttle is returned as a placeholder and the
    hint is ``SINGULAR`` so callers can refuse the arc.
    """
    if singular_tol is None:
        singular_tol = default_singular_tol(params, state.mass)
    res = direction_law(costate.p_v, constraints.pointing_half_angle, constraints.pointing_enabled)
    psi = switching_function(state, costate, res.d, params)
    if psi > singular_tol:
        return Control(res.d, params.throttle_max), ArcHint.MAX
    if psi < -singular_tol:
        return Control(res.d, params.throttle_min), ArcHint.MIN
    return Control(res.d, params.throttle_min), ArcHint.SINGULAR


def mass_multiplier_target(cost: str, flow_rate: float) -> float:
    """Final value ``p_m(t_f)`` required by transversality with ``p0 = -1``."""
    if cost == "max_final_mass":
        return 1.0
    if cost == "min_fuel" and flow_rate > 0.0:
        return 1.0 / flow_rate
    return 0.0


def running_cost_multiplier(cost: str, flow_rate: float) -> float:
    """
    Multiplier ``p_w`` of the fuel accumulator.

    Only the constant-mass min-fuel problem keeps a running cost; with
    ``q > 0`` it is rewritten through the final mass instead.
    """
    return -1.0 if (cost == "min_fuel" and flow_rate == 0.0) else 0.0


def hamiltonian(state: State, costate: Costate, control: Control, params: VehicleParams) -> float:
    """
    ``<q_r, v> + <p_v, (T - sigma/|u|) u/m - g> - p_m q |u| + p_w |u|``.

    The running-cost multiplier ``p_w`` multiplies the fuel accumulator rate
    ``|u|``; for purely final costs it is zero.
    """
    a = control.throttle
    force = params.thrust_max * a - params.pressure_term
    accel = force / state.mass * control.direction - np.array([0.0, 0.0, params.gravity])
    return float(costate.q_r @ state.velocity + costate.p_v @ accel
                 - costate.p_m * params.flow_rate * a + costate.p_w * a)


def adjoint_rhs(state: State, costate: Costate, control: Control, params: VehicleParams) -> np.ndarray:
    """
    Adjoint derivative ``(p_r', p_v', p_m')`` as a 7-vector.

    ``p_r' = 0``, ``p_v' = -q_r`` and
    ``p_m' = <p_v, (T - sigma/|u|) u> / m^2``. The measure part of ``q_r``
    is not advanced here.
    """
    force = params.thrust_max * control.throttle - params.pressure_term
    out = np.zeros(7)
    out[3:6] = -costate.q_r
    out[6] = force * float(costate.p_v @ control.direction) / state.mass ** 2
    return out


def qr_dot_d(costate: Costate, direction) -> float:
    """``<q_r, d>``; the switching function decreases at rate ``(T/m)`` times this."""
    return float(costate.q_r @ np.asarray(direction, dtype=float))


def psi_rate(state: State, costate: Costate, direction, params: VehicleParams) -> float:
    """
    Time derivative of the switching function along an extremal.

    Vacuum: ``-(T/m) <q_r, d>``. Atmosphere (no pointing):
    ``(sigma q |p_v| / m - T <q_r, d>) / m``.
    """
    d = np.asarray(direction, dtype=float)
    m = state.mass
    rate = -params.thrust_max / m * qr_dot_d(costate, d)
    if params.pressure_term > 0.0:
        rate += params.pressure_term * params.flow_rate * float(costate.p_v @ d) / m ** 2
    return rate
