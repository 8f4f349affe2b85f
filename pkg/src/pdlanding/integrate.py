"""
Fixed-step RK4 propagation and the ``Trajectory`` container.

Trajectories are stored as node arrays. Every producer also carries the
throttle integral ``int |u| dt`` as an extra integrated component, so the
mass bookkeeping ``m(t_f) = m0 - q int |u| dt`` holds to rounding.
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .model import Control, Scenario, State, dynamics_rhs


class IntegrationError(RuntimeError):
    pass


class FuelExhausted(IntegrationError):
    pass


def rk4_step(rhs: Callable, y: np.ndarray, t: float, dt: float) -> np.ndarray:
    """One classical Runge-Kutta step of ``y' = rhs(t, y)``."""
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = rhs(t + dt, y + dt * k3)
    out = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not (np.all(np.isfinite(k1)) and np.all(np.isfinite(k2)) and np.all(np.isfinite(k3))
            and np.all(np.isfinite(k4)) and np.all(np.isfinite(out))):
        raise IntegrationError(f"non-finite value in RK4 step at t = {t:g}")
    return out


def simpson(times, values) -> float:
    """
    Composite Simpson rule on a possibly non-uniform grid.

    An odd number of intervals is closed with a trapezoid on the last one.
    """
    t = np.asarray(times, dtype=float)
    f = np.asarray(values, dtype=float)
    n = len(t) - 1
    if n < 1:
        return 0.0
    total = 0.0
    last = n if n % 2 == 0 else n - 1
    for i in range(0, last, 2):
        h0 = t[i + 1] - t[i]
        h1 = t[i + 2] - t[i + 1]
        hs = h0 + h1
        total += hs / 6.0 * ((2.0 - h1 / h0) * f[i] + hs * hs / (h0 * h1) * f[i + 1]
                             + (2.0 - h0 / h1) * f[i + 2])
    if last < n:
        total += 0.5 * (t[n] - t[n - 1]) * (f[n] + f[n - 1])
    return float(total)


@dataclass(frozen=True)
class Trajectory:
    """
    Node samples of a landing trajectory.

    ``states`` is ``(N, 7)`` in the ``[r, v, m]`` layout, ``directions`` is
    ``(N, 3)`` unit thrust axes and ``throttles`` is ``(N,)``. ``costates``
    is ``(N, 7)`` ``[p_r, p_v, p_m]`` or ``None``; ``mu_accum`` is the
    running measure integral so that ``q_r = p_r - mu_accum``.

    Diagnostics (same length as ``times``): ``h`` glide-slope value (NaN
    when the constraint is off), ``psi`` switching function and
    ``qr_dot_d`` (NaN without costates), ``pointing_slack``
    ``d_z - cos(theta)`` (NaN when pointing is off). ``fuel_trace`` is the
    running throttle integral ``int_0^t |u| ds`` as integrated by the
    producer; without it the trapezoid rule on the nodes is used.
    """

    times: np.ndarray
    states: np.ndarray
    directions: np.ndarray
    throttles: np.ndarray
    model: str = "vacuum"
    costates: Optional[np.ndarray] = None
    mu_accum: Optional[np.ndarray] = None
    p_w: float = 0.0
    fuel_trace: Optional[np.ndarray] = None
    cost_value: float = float("nan")
    h: Optional[np.ndarray] = None
    psi: Optional[np.ndarray] = None
    qr_dot_d: Optional[np.ndarray] = None
    pointing_slack: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or len(t) < 2:
            raise ValueError("a trajectory needs at least two nodes")
        if t[0] != 0.0 or np.any(np.diff(t) <= 0.0):
            raise ValueError("times must start at 0 and increase strictly")
        n = len(t)
        if np.shape(self.states) != (n, 7) or np.shape(self.directions) != (n, 3) \
                or np.shape(self.throttles) != (n,):
            raise ValueError("node array shapes do not match the time grid")
        if self.fuel_trace is not None and np.shape(self.fuel_trace) != (n,):
            raise ValueError("fuel_trace must have one value per node")

    def __len__(self):
        return len(self.times)

    @property
    def t_f(self) -> float:
        return float(self.times[-1])

    @property
    def controls(self) -> np.ndarray:
        """Thrust vectors ``u = throttle * d``, ``(N, 3)``."""
        return self.throttles[:, None] * self.directions

    @property
    def q_r(self) -> Optional[np.ndarray]:
        if self.costates is None:
            return None
        mu = self.mu_accum if self.mu_accum is not None else 0.0
        return self.costates[:, 0:3] - mu

    def state(self, i: int) -> State:
        return State.from_array(self.states[i])

    def control(self, i: int) -> Control:
        return Control(self.directions[i], self.throttles[i])

    def costate(self, i: int):
        from .pmp import Costate
        if self.costates is None:
            return None
        mu = self.mu_accum[i] if self.mu_accum is not None else np.zeros(3)
        return Costate.from_array(self.costates[i], mu_accum=mu, p_w=self.p_w)

    def fuel_integral(self) -> float:
        """``int |u| dt``: the integrated value when known, else trapezoid on the nodes."""
        if self.fuel_trace is not None:
            return float(self.fuel_trace[-1])
        return float(np.trapezoid(self.throttles, self.times))


def cost_of(scenario: Scenario, t_f: float, final_mass: float, fuel: float) -> float:
    if scenario.cost == "min_fuel":
        return fuel
    if scenario.cost == "max_final_mass":
        return -final_mass
    return t_f


def attach_diagnostics(traj: Trajectory, scenario: Scenario) -> Trajectory:
    """Return a copy of ``traj`` with ``h``, ``psi``, ``qr_dot_d``, slack and cost filled in."""
    from .model import glide_slope
    cons = scenario.constraints
    params = scenario.params
    n = len(traj)
    nan = np.full(n, np.nan)
    h = nan.copy()
    if cons.glide_slope_enabled:
        h = np.array([glide_slope(r, cons.glide_slope_angle, need_gradient=False)[0]
                      for r in traj.states[:, 0:3]])
    slack = nan.copy()
    if cons.pointing_enabled:
        slack = traj.directions[:, 2] - np.cos(cons.pointing_half_angle)
    psi = nan.copy()
    qd = nan.copy()
    if traj.costates is not None:
        from .pmp import _direction
        qr = traj.q_r
        p_v = traj.costates[:, 3:6]
        m = traj.states[:, 6]
        for i in range(n):
            d, _, _ = _direction(p_v[i], cons.pointing_half_angle, cons.pointing_enabled)
            psi[i] = (params.thrust_max / m[i] * float(p_v[i] @ d)
                      - traj.costates[i, 6] * params.flow_rate + traj.p_w)
            qd[i] = float(qr[i] @ traj.directions[i])
    cost = cost_of(scenario, traj.t_f, traj.states[-1, 6], traj.fuel_integral())
    return replace(traj, h=h, pointing_slack=slack, psi=psi, qr_dot_d=qd,
                   cost_value=cost, model=params.model)


def propagate(scenario: Scenario, control_policy: Callable, t_f: float,
              n_steps: int = 400) -> Trajectory:
    """
    Integrate the state under ``control_policy(t, state, costate) -> Control``.

    The policy receives ``costate=None``. The throttle integral is
    integrated with the state. Raises ``FuelExhausted`` when the mass
    reaches ``mass_empty`` before ``t_f``.
    """
    if n_steps < 10:
        raise ValueError("n_steps must be at least 10")
    params = scenario.params

    def rhs(t, y):
        c = control_policy(t, State.from_array(y[:7]), None)
        out = np.empty(8)
        out[:7] = dynamics_rhs(y[:7], c.direction, c.throttle, params)
        out[7] = c.throttle
        return out

    times = np.linspace(0.0, t_f, n_steps + 1)
    ys = np.empty((n_steps + 1, 8))
    ys[0, :7] = scenario.initial_state.as_array()
    ys[0, 7] = 0.0
    for k in range(n_steps):
        ys[k + 1] = rk4_step(rhs, ys[k], times[k], times[k + 1] - times[k])
        if ys[k + 1, 6] <= params.mass_empty and k + 1 < n_steps:
            raise FuelExhausted(f"fuel exhausted at t = {times[k + 1]:g} s")
    dirs = np.empty((n_steps + 1, 3))
    thr = np.empty(n_steps + 1)
    for k in range(n_steps + 1):
        c = control_policy(times[k], State.from_array(ys[k, :7]), None)
        dirs[k] = c.direction
        thr[k] = c.throttle
    traj = Trajectory(times, ys[:, :7], dirs, thr, model=params.model,
                      fuel_trace=ys[:, 7].copy())
    return attach_diagnostics(traj, scenario)
