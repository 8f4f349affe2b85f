"""
Direct transcription solver.

The problem is discretized with trapezoidal collocation on ``n_nodes``
uniformly spaced nodes of the normalized time ``tau in [0, 1]``. Decision
variables are the scaled position and velocity at each node, the throttle,
a signed tilt from the vertical and an azimuth at each node, and the final
time. The mass is not a decision variable: with a throttle-only mass rate
the trapezoidal mass defect has the closed form

    m_k = m_0 - q * h * sum_{i<k} (a_i + a_{i+1}) / 2,

which keeps the mass bookkeeping exact.

The nonlinear program is solved with an augmented-Lagrangian outer loop
(Powell-Hestenes-Rockafellar treatment of inequalities) around a
box-constrained quasi-Newton inner solve.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .analyze import Verdict, analyze_trajectory
from .indirect import default_guess, reference_scales
from .integrate import Trajectory, attach_diagnostics
from .model import Scenario

log = logging.getLogger(__name__)

APEX_SMOOTHING = 1e-4


class DirectSolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class TranscriptionConfig:
    """
    Settings of the transcription and of the optimizer.

    Tolerances apply to scaled quantities: lengths in units of the initial
    distance to the target, speeds in units of the reference speed, mass in
    units of the initial mass. ``enforce_mass_floor`` adds
    ``m(t_f) >= m_e`` as a constraint; without it a dry-mass violation is
    still reported by the analysis.
    """

    n_nodes: int = 100
    feasibility_tol: float = 1e-6
    optimality_tol: float = 1e-5
    penalty_init: float = 1000.0
    penalty_growth: float = 10.0
    penalty_max: float = 1e10
    max_outer: int = 30
    inner_max_iter: int = 4000
    enforce_mass_floor: bool = False

    def __post_init__(self):
        if self.n_nodes < 20:
            raise ValueError("n_nodes must be at least 20")
        if self.penalty_growth <= 1.0:
            raise ValueError("penalty_growth must exceed 1")


@dataclass
class DecisionVector:
    """Unpacked decision variables in scaled units."""

    rv: np.ndarray        # (N, 6) position and velocity
    throttle: np.ndarray  # (N,)
    tilt: np.ndarray      # (N,) signed angle from the vertical
    azimuth: np.ndarray   # (N,)
    t_f: float

    def pack(self) -> np.ndarray:
        return np.concatenate([self.rv.ravel(), self.throttle, self.tilt, self.azimuth, [self.t_f]])


@dataclass
class MultiplierTrace:
    """
    Multipliers at the solution, in scaled units.

    ``glide_slope`` holds one value per node (zero where the constraint is
    not imposed), ``defects`` one row per interval in the position/velocity
    layout, ``mass_floor`` the multiplier of ``m(t_f) >= m_e``.
    """

    times: np.ndarray
    glide_slope: np.ndarray
    defects: np.ndarray
    mass_floor: float = 0.0


def directions_from_angles(tilt, azimuth):
    st, ct = np.sin(tilt), np.cos(tilt)
    sa, ca = np.sin(azimuth), np.cos(azimuth)
    d = np.stack([st * ca, st * sa, ct], axis=-1)
    d_tilt = np.stack([ct * ca, ct * sa, -st], axis=-1)
    d_az = np.stack([-st * sa, st * ca, np.zeros_like(st)], axis=-1)
    return d, d_tilt, d_az


def angles_from_directions(d, tilt_max: float = math.pi):
    """Inverse of the angle parameterization, azimuth in ``[-pi/2, pi/2]``."""
    d = np.asarray(d, dtype=float)
    dx, dy, dz = d[:, 0], d[:, 1], d[:, 2]
    horiz = np.hypot(dx, dy)
    az = np.where(np.abs(dx) > 1e-15, np.arctan(dy / np.where(dx == 0.0, 1.0, dx)),
                  np.where(horiz > 0.0, math.pi / 2, 0.0))
    sign = np.where(np.abs(dx) > 1e-15, np.sign(dx), np.where(dy >= 0.0, 1.0, -1.0))
    tilt = sign * np.arctan2(horiz, dz)
    return np.clip(tilt, -tilt_max, tilt_max), az


class TranscribedProblem:
    """Objective, constraints and exact gradients of the transcribed problem."""

    def __init__(self, scenario: Scenario, config: TranscriptionConfig = TranscriptionConfig()):
        self.scenario = scenario
        self.config = config
        p = scenario.params
        c = scenario.constraints
        s0 = scenario.initial_state
        N = config.n_nodes
        self.N = N
        L, V, t_ref = reference_scales(scenario)
        self.L, self.V, self.t_ref, self.M = L, V, t_ref, s0.mass
        acc = t_ref * t_ref / L
        self.thrust = p.thrust_max * acc / self.M
        self.sigma = p.pressure_term * acc / self.M
        self.grav = p.gravity * acc
        self.flow = p.flow_rate * t_ref / self.M
        self.m_empty = p.mass_empty / self.M
        self.tan_gamma = math.tan(c.glide_slope_angle) if c.glide_slope_enabled else 0.0
        self.trap = np.ones(N)
        self.trap[[0, -1]] = 0.5

        n_rv = 6 * N
        self.i_a = slice(n_rv, n_rv + N)
        self.i_tilt = slice(n_rv + N, n_rv + 2 * N)
        self.i_az = slice(n_rv + 2 * N, n_rv + 3 * N)
        self.i_tf = n_rv + 3 * N
        self.size = self.i_tf + 1

        lb = np.full(self.size, -np.inf)
        ub = np.full(self.size, np.inf)
        lb[self.i_a], ub[self.i_a] = p.throttle_min, p.throttle_max
        tilt_max = c.pointing_half_angle if c.pointing_enabled else math.pi
        self.tilt_max = tilt_max
        lb[self.i_tilt], ub[self.i_tilt] = -tilt_max, tilt_max
        lb[self.i_az], ub[self.i_az] = -math.pi / 2, math.pi / 2
        if scenario.final_time is not None:
            lb[self.i_tf] = ub[self.i_tf] = scenario.final_time / t_ref
        else:
            lb[self.i_tf], ub[self.i_tf] = 1e-2, 1e2
        rv0 = np.concatenate([s0.position / L, s0.velocity / V])
        lb[0:6] = ub[0:6] = rv0
        last = 6 * (N - 1)
        if scenario.pinpoint:
            target = np.concatenate([scenario.final_position_xy, [scenario.final_altitude]]) / L
            lb[last:last + 3] = ub[last:last + 3] = target
            lb[last + 3:last + 6] = ub[last + 3:last + 6] = 0.0
        else:
            lb[last + 2] = ub[last + 2] = scenario.final_altitude / L
            lb[last + 5] = ub[last + 5] = 0.0
        self.lb, self.ub = lb, ub

        # glide slope is imposed where the position is not pinned by a boundary condition
        if c.glide_slope_enabled:
            nodes = np.arange(1, N - 1 if scenario.pinpoint else N)
        else:
            nodes = np.arange(0)
        self.glide_nodes = nodes
        self.has_mass_floor = config.enforce_mass_floor and p.flow_rate > 0.0
        self.n_eq = 6 * (N - 1)
        self.n_ineq = len(nodes) + (1 if self.has_mass_floor else 0)

    # -- layout -----------------------------------------------------------

    def unpack(self, z) -> DecisionVector:
        N = self.N
        return DecisionVector(z[:6 * N].reshape(N, 6), z[self.i_a], z[self.i_tilt], z[self.i_az],
                              float(z[self.i_tf]))

    def mass(self, a, tf):
        """Scaled mass at the nodes and the cumulative trapezoid sum ``S``."""
        h = tf / (self.N - 1)
        S = np.concatenate([[0.0], np.cumsum(0.5 * (a[:-1] + a[1:]))])
        return 1.0 - self.flow * h * S, S

    def _rhs(self, rv, a, d, m):
        force = (self.thrust * a - self.sigma) / m
        F = np.empty_like(rv)
        F[:, 0:3] = rv[:, 3:6]
        F[:, 3:6] = force[:, None] * d
        F[:, 5] -= self.grav
        return F

    # -- pieces -----------------------------------------------------------

    def objective(self, z):
        """Scaled cost and its gradient."""
        N = self.N
        tf = z[self.i_tf]
        g = np.zeros(self.size)
        if self.scenario.cost == "min_time":
            g[self.i_tf] = 1.0
            return float(tf), g
        a = z[self.i_a]
        h = tf / (N - 1)
        total = float(self.trap @ a)
        g[self.i_a] = h * self.trap
        g[self.i_tf] = total / (N - 1)
        return h * total, g

    def defects(self, z):
        x = self.unpack(z)
        m, _ = self.mass(x.throttle, x.t_f)
        d, _, _ = directions_from_angles(x.tilt, x.azimuth)
        F = self._rhs(x.rv, x.throttle, d, m)
        h = x.t_f / (self.N - 1)
        C = x.rv[1:] - x.rv[:-1] - 0.5 * h * (F[1:] + F[:-1])
        return C.ravel()

    def defects_vjp(self, z, w):
        """Gradient of ``<w, defects(z)>``."""
        N = self.N
        x = self.unpack(z)
        a, tf = x.throttle, x.t_f
        h = tf / (N - 1)
        m, S = self.mass(a, tf)
        d, d_tilt, d_az = directions_from_angles(x.tilt, x.azimuth)
        F = self._rhs(x.rv, a, d, m)
        W = np.asarray(w).reshape(N - 1, 6)
        s = np.zeros((N, 6))
        s[:-1] += W
        s[1:] += W
        grad = np.zeros(self.size)
        g_rv = np.zeros((N, 6))
        g_rv[1:] += W
        g_rv[:-1] -= W
        g_rv[:, 3:6] -= 0.5 * h * s[:, 0:3]
        sv = s[:, 3:6]
        force = self.thrust * a - self.sigma
        sv_d = np.einsum("ij,ij->i", sv, d)
        g_m = 0.5 * h * force * sv_d / (m * m)
        g_a = -0.5 * h * self.thrust * sv_d / m
        g_tilt = -0.5 * h * force / m * np.einsum("ij,ij->i", sv, d_tilt)
        g_az = -0.5 * h * force / m * np.einsum("ij,ij->i", sv, d_az)
        g_tf = -0.5 / (N - 1) * float(np.sum(s * F))
        ga, gtf = self._mass_chain(g_m, a, tf, S)
        grad[:6 * N] = g_rv.ravel()
        grad[self.i_a] = g_a + ga
        grad[self.i_tilt] = g_tilt
        grad[self.i_az] = g_az
        grad[self.i_tf] = g_tf + gtf
        return grad

    def _mass_chain(self, g_m, a, tf, S):
        """Pull a mass gradient back to the throttle and the final time."""
        N = self.N
        if self.flow == 0.0:
            return np.zeros(N), 0.0
        h = tf / (N - 1)
        R = np.concatenate([np.cumsum(g_m[::-1])[::-1], [0.0]])
        dS = 0.5 * R[1:]
        dS[1:] += 0.5 * R[1:-1]
        return -self.flow * h * dS, -self.flow / (N - 1) * float(g_m @ S)

    def inequalities(self, z):
        """Values ``g(z) >= 0``: glide slope at the free nodes, then the mass floor."""
        rv = z[:6 * self.N].reshape(self.N, 6)
        out = []
        if len(self.glide_nodes):
            r = rv[self.glide_nodes, 0:3]
            out.append(r[:, 2] - self.tan_gamma * (np.sqrt(r[:, 0] ** 2 + r[:, 1] ** 2 + APEX_SMOOTHING ** 2)
                                                   - APEX_SMOOTHING))
        if self.has_mass_floor:
            m, _ = self.mass(z[self.i_a], z[self.i_tf])
            out.append([m[-1] - self.m_empty])
        return np.concatenate(out) if out else np.zeros(0)

    def inequalities_vjp(self, z, w):
        N = self.N
        grad = np.zeros(self.size)
        k = len(self.glide_nodes)
        if k:
            rv = z[:6 * N].reshape(N, 6)
            r = rv[self.glide_nodes, 0:3]
            rho = np.sqrt(r[:, 0] ** 2 + r[:, 1] ** 2 + APEX_SMOOTHING ** 2)
            g_rv = np.zeros((N, 6))
            g_rv[self.glide_nodes, 0] = -w[:k] * self.tan_gamma * r[:, 0] / rho
            g_rv[self.glide_nodes, 1] = -w[:k] * self.tan_gamma * r[:, 1] / rho
            g_rv[self.glide_nodes, 2] = w[:k]
            grad[:6 * N] = g_rv.ravel()
        if self.has_mass_floor:
            a, tf = z[self.i_a], z[self.i_tf]
            _, S = self.mass(a, tf)
            g_m = np.zeros(N)
            g_m[-1] = w[k]
            ga, gtf = self._mass_chain(g_m, a, tf, S)
            grad[self.i_a] += ga
            grad[self.i_tf] += gtf
        return grad

    def augmented(self, z, lam, mu, rho):
        """Augmented Lagrangian value and gradient."""
        J, gJ = self.objective(z)
        C = self.defects(z)
        G = self.inequalities(z)
        shifted = np.maximum(0.0, mu - rho * G)
        val = J + lam @ C + 0.5 * rho * (C @ C) + (shifted @ shifted - mu @ mu) / (2.0 * rho)
        grad = gJ + self.defects_vjp(z, lam + rho * C)
        if len(G):
            grad -= self.inequalities_vjp(z, shifted)
        return float(val), grad

    def lagrangian_gradient(self, z, lam, mu):
        _, gJ = self.objective(z)
        grad = gJ + self.defects_vjp(z, lam)
        if len(mu):
            grad -= self.inequalities_vjp(z, mu)
        return grad

    def projected_gradient_norm(self, z, grad) -> float:
        free = (self.lb < self.ub)
        step = np.clip(z - grad, self.lb, self.ub) - z
        return float(np.max(np.abs(step[free]))) if np.any(free) else 0.0

    # -- guesses and output -----------------------------------------------

    def initial_guess(self, warm_start: Optional[Trajectory] = None) -> np.ndarray:
        N = self.N
        sc = self.scenario
        p = sc.params
        z = np.zeros(self.size)
        if warm_start is not None:
            tf = warm_start.t_f
            t = np.linspace(0.0, tf, N)
            rv = np.column_stack([np.interp(t, warm_start.times, warm_start.states[:, j]) for j in range(6)])
            rv[:, 0:3] /= self.L
            rv[:, 3:6] /= self.V
            # the throttle is sampled, not interpolated, to keep bang-bang values
            idx = np.clip(np.searchsorted(warm_start.times, t, side="right") - 1, 0, len(warm_start) - 1)
            a = warm_start.throttles[idx]
            tilt, az = angles_from_directions(warm_start.directions[idx], self.tilt_max)
        else:
            tf = default_guess(sc).t_f
            s = np.linspace(0.0, 1.0, N)[:, None]
            start = np.concatenate([sc.initial_state.position / self.L, sc.initial_state.velocity / self.V])
            end = np.clip(np.zeros(6), self.lb[6 * (N - 1):6 * N], self.ub[6 * (N - 1):6 * N])
            rv = (1.0 - s) * start + s * end
            a = np.full(N, 0.5 * (p.throttle_min + p.throttle_max))
            tilt = np.zeros(N)
            az = np.zeros(N)
        z[:6 * N] = rv.ravel()
        z[self.i_a] = a
        z[self.i_tilt] = tilt
        z[self.i_az] = az
        z[self.i_tf] = tf / self.t_ref
        return np.clip(z, self.lb, self.ub)

    def multipliers_from_costates(self, traj: Trajectory) -> Optional[np.ndarray]:
        """
        Defect multipliers estimated from an extremal's adjoint.

        The multiplier of the defect on ``[t_k, t_k+1]`` is the position and
        velocity adjoint at the interval midpoint, rescaled from physical to
        transcription units. Returns ``None`` when ``traj`` has no adjoint.
        """
        if traj.costates is None:
            return None
        N = self.N
        mid = (np.arange(N - 1) + 0.5) / (N - 1) * traj.t_f
        p = np.column_stack([np.interp(mid, traj.times, traj.costates[:, j]) for j in range(6)])
        cost_scale = self.t_ref
        if self.scenario.cost == "max_final_mass":
            cost_scale *= self.scenario.params.flow_rate
        scale = np.array([self.L] * 3 + [self.V] * 3) / cost_scale
        return (p * scale).ravel()

    def to_trajectory(self, z, meta=None) -> Trajectory:
        x = self.unpack(z)
        m, S = self.mass(x.throttle, x.t_f)
        d, _, _ = directions_from_angles(x.tilt, x.azimuth)
        t_f = x.t_f * self.t_ref
        times = np.linspace(0.0, t_f, self.N)
        states = np.column_stack([x.rv[:, 0:3] * self.L, x.rv[:, 3:6] * self.V, m * self.M])
        h = t_f / (self.N - 1)
        traj = Trajectory(times, states, d, x.throttle.copy(), model=self.scenario.params.model,
                          fuel_trace=h * S, meta=dict(meta or {}))
        return attach_diagnostics(traj, self.scenario)


def transcribe(scenario: Scenario, config: TranscriptionConfig = TranscriptionConfig()) -> TranscribedProblem:
    return TranscribedProblem(scenario, config)


@dataclass
class DirectResult:
    z: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    status: str
    outer_iterations: int
    feasibility: float
    stationarity: float
    complementarity: float
    history: list = field(default_factory=list)


def augmented_lagrangian(nlp: TranscribedProblem, z0: np.ndarray, lam0=None, mu0=None,
                         rho0: Optional[float] = None) -> DirectResult:
    """
    Outer multiplier loop.

    Each subproblem minimizes the augmented Lagrangian over the variable
    box. Multipliers are updated after every subproblem; the penalty grows
    when the constraint violation has not dropped by a factor four.
    """
    cfg = nlp.config
    z = np.clip(np.asarray(z0, dtype=float), nlp.lb, nlp.ub)
    lam = np.zeros(nlp.n_eq) if lam0 is None else np.array(lam0, dtype=float)
    mu = np.zeros(nlp.n_ineq) if mu0 is None else np.array(mu0, dtype=float)
    rho = cfg.penalty_init if rho0 is None else rho0
    bounds = list(zip(nlp.lb, nlp.ub))
    history = []
    prev_viol = np.inf
    status = "max_outer"
    feas = stat = comp = np.inf
    it = 0
    for it in range(1, cfg.max_outer + 1):
        res = minimize(nlp.augmented, z, args=(lam, mu, rho), jac=True, method="L-BFGS-B",
                       bounds=bounds,
                       options={"maxiter": cfg.inner_max_iter, "maxcor": 30, "ftol": 1e-16,
                                "gtol": 0.1 * cfg.optimality_tol, "maxfun": 4 * cfg.inner_max_iter})
        z = res.x
        C = nlp.defects(z)
        G = nlp.inequalities(z)
        lam = lam + rho * C
        mu = np.maximum(0.0, mu - rho * G)
        viol = max(float(np.max(np.abs(C), initial=0.0)), float(np.max(-G, initial=0.0)))
        feas = viol
        comp = float(np.max(np.abs(mu * G), initial=0.0))
        stat = nlp.projected_gradient_norm(z, nlp.lagrangian_gradient(z, lam, mu))
        history.append(dict(outer=it, rho=rho, feasibility=feas, stationarity=stat,
                            complementarity=comp, inner=int(res.nit)))
        log.debug("outer %d: rho=%.1e feas=%.2e stat=%.2e comp=%.2e inner=%d", it, rho, feas, stat, comp, res.nit)
        if feas <= cfg.feasibility_tol and stat <= cfg.optimality_tol and comp <= cfg.feasibility_tol:
            status = "converged"
            break
        if viol > cfg.feasibility_tol and viol > 0.25 * prev_viol:
            rho *= cfg.penalty_growth
        prev_viol = min(prev_viol, viol)
        if rho > cfg.penalty_max:
            status = "infeasible"
            break
    return DirectResult(z, lam, mu, status, it, feas, stat, comp, history)


def solve_direct(scenario: Scenario, config: TranscriptionConfig = TranscriptionConfig(),
                 warm_start: Optional[Trajectory] = None):
    """
    Direct solution of the landing problem.

    Returns
    -------
    trajectory : Trajectory
        Node samples; ``meta`` holds the optimizer status and history.
    report : StructureReport
        Analysis of the trajectory; ``report.solver`` holds the optimizer
        verdicts ``nlp_convergence``, ``nlp_feasibility``,
        ``nlp_stationarity`` and ``complementarity``.
    multipliers : MultiplierTrace
        A partial (non-converged) result is still returned; its
        ``nlp_convergence`` verdict fails.
    """
    nlp = transcribe(scenario, config)
    z0 = nlp.initial_guess(warm_start)
    lam0 = nlp.multipliers_from_costates(warm_start) if warm_start is not None else None
    out = augmented_lagrangian(nlp, z0, lam0=lam0)
    meta = dict(solver="direct", status=out.status, outer_iterations=out.outer_iterations,
                feasibility=out.feasibility, stationarity=out.stationarity,
                complementarity=out.complementarity, history=out.history,
                n_nodes=config.n_nodes)
    traj = nlp.to_trajectory(out.z, meta)
    report = analyze_trajectory(traj, scenario)
    cfg = config
    report.solver["nlp_convergence"] = Verdict(
        "pass" if out.status == "converged" else "fail", float(out.outer_iterations),
        {"converged": "augmented Lagrangian converged",
         "max_outer": "outer iteration limit reached",
         "infeasible": "penalty diverged: scenario likely infeasible"}[out.status])
    report.solver["nlp_feasibility"] = Verdict(
        "pass" if out.feasibility <= cfg.feasibility_tol else "fail", out.feasibility, "scaled constraint violation")
    report.solver["nlp_stationarity"] = Verdict(
        "pass" if out.stationarity <= cfg.optimality_tol else "fail", out.stationarity,
        "scaled projected Lagrangian gradient")
    report.solver["complementarity"] = Verdict(
        "pass" if out.complementarity <= cfg.feasibility_tol and np.all(out.mu >= 0.0) else "fail",
        out.complementarity, "max |mu_k h_k| over constrained nodes")
    k = len(nlp.glide_nodes)
    glide = np.zeros(nlp.N)
    glide[nlp.glide_nodes] = out.mu[:k]
    mult = MultiplierTrace(traj.times.copy(), glide, out.lam.reshape(nlp.N - 1, 6),
                           float(out.mu[k]) if nlp.has_mass_floor else 0.0)
    return traj, report, mult
