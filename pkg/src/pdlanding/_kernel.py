"""
Compiled integrator of the state/adjoint system used by the shooting method.

Layout of the 15-vector ``y``::

    [x, y, z, vx, vy, vz, m, p_rx, p_ry, p_rz, p_vx, p_vy, p_vz, p_m, w]

where ``w`` is the throttle integral. ``P`` packs the constants, see
``pack``. Failures are reported through a status code so the kernel stays
exception free.
"""

import math

import numpy as np
from numba import njit

INTERIOR, CONE, DEGENERATE = 0, 1, 2

OK, FUEL, SINGULAR, NONFINITE, CHATTER, OVERFLOW, BADTIME = range(7)

# indices into P
_T, _Q, _SIG, _G, _UMIN, _UMAX, _ME, _POINT, _CT, _ST, _PW, _SMOOTH, _PSISCALE, _SINGTOL, _NSTEPS = range(15)


def pack(T, q, sig, g, umin, umax, me, pointing, ct, st, p_w, smoothing, psi_scale, singular_tol, n_steps):
    return np.array([T, q, sig, g, umin, umax, me, 1.0 if pointing else 0.0, ct, st, p_w,
                     smoothing, psi_scale, singular_tol, float(n_steps)])


@njit(cache=True)
def branch_of(pvx, pvy, pvz, P):
    if P[_POINT] == 0.0:
        return INTERIOR
    n = math.sqrt(pvx * pvx + pvy * pvy + pvz * pvz)
    if n > 0.0 and pvz >= n * P[_CT]:
        return INTERIOR
    hn = math.sqrt(pvx * pvx + pvy * pvy)
    if hn > 1e-12 * n:
        return CONE
    return DEGENERATE


@njit(cache=True)
def direction(pvx, pvy, pvz, branch, P):
    if branch == INTERIOR:
        n = math.sqrt(pvx * pvx + pvy * pvy + pvz * pvz)
        if n == 0.0:
            if P[_POINT] == 0.0:
                return 0.0, 0.0, 1.0
            return P[_ST], 0.0, P[_CT]
        return pvx / n, pvy / n, pvz / n
    if branch == CONE:
        hn = math.sqrt(pvx * pvx + pvy * pvy)
        if hn > 0.0:
            return P[_ST] * pvx / hn, P[_ST] * pvy / hn, P[_CT]
    return P[_ST], 0.0, P[_CT]


@njit(cache=True)
def psi_b(y, branch, P):
    dx, dy, dz = direction(y[10], y[11], y[12], branch, P)
    return P[_T] / y[6] * (y[10] * dx + y[11] * dy + y[12] * dz) - P[_Q] * y[13] + P[_PW]


@njit(cache=True)
def psi(y, P):
    return psi_b(y, branch_of(y[10], y[11], y[12], P), P)


@njit(cache=True)
def cone_margin(y, P):
    n = math.sqrt(y[10] * y[10] + y[11] * y[11] + y[12] * y[12])
    return y[12] - n * P[_CT]


@njit(cache=True)
def throttle(y, level, branch, P):
    if P[_SMOOTH] > 0.0:
        s = psi_b(y, branch, P) / (P[_SMOOTH] * P[_PSISCALE])
        return P[_UMIN] + (P[_UMAX] - P[_UMIN]) * 0.5 * (1.0 + math.tanh(s))
    if level > 0:
        return P[_UMAX]
    return P[_UMIN]


@njit(cache=True)
def rhs(y, level, branch, P, out):
    dx, dy, dz = direction(y[10], y[11], y[12], branch, P)
    a = throttle(y, level, branch, P)
    m = y[6]
    f = P[_T] * a - P[_SIG]
    fm = f / m
    out[0] = y[3]
    out[1] = y[4]
    out[2] = y[5]
    out[3] = fm * dx
    out[4] = fm * dy
    out[5] = fm * dz - P[_G]
    out[6] = -P[_Q] * a
    out[7] = 0.0
    out[8] = 0.0
    out[9] = 0.0
    out[10] = -y[7]
    out[11] = -y[8]
    out[12] = -y[9]
    out[13] = f * (y[10] * dx + y[11] * dy + y[12] * dz) / (m * m)
    out[14] = a


@njit(cache=True)
def step(y, dt, level, branch, P):
    n = y.shape[0]
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    rhs(y, level, branch, P, k1)
    for i in range(n):
        tmp[i] = y[i] + 0.5 * dt * k1[i]
    rhs(tmp, level, branch, P, k2)
    for i in range(n):
        tmp[i] = y[i] + 0.5 * dt * k2[i]
    rhs(tmp, level, branch, P, k3)
    for i in range(n):
        tmp[i] = y[i] + dt * k3[i]
    rhs(tmp, level, branch, P, k4)
    out = np.empty(n)
    for i in range(n):
        out[i] = y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return out


@njit(cache=True)
def event_value(kind, y, P):
    if kind == 0:
        return psi(y, P)
    return cone_margin(y, P)


@njit(cache=True)
def locate(kind, y, dt, level, branch, P):
    """Bisection for the first sign change of an event function inside ``[0, dt]``."""
    g0 = event_value(kind, y, P)
    lo = 0.0
    hi = dt
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        gm = event_value(kind, step(y, mid, level, branch, P), P)
        if (gm > 0.0) == (g0 > 0.0) and gm != 0.0:
            lo = mid
        else:
            hi = mid
    return hi


@njit(cache=True)
def initial_level(y, branch, P):
    p = psi_b(y, branch, P)
    if abs(p) > P[_SINGTOL]:
        return 1 if p > 0.0 else -1
    dx, dy, dz = direction(y[10], y[11], y[12], branch, P)
    rate = -(y[7] * dx + y[8] * dy + y[9] * dz)
    return 1 if rate >= 0.0 else -1


@njit(cache=True)
def integrate(y0, t_f, P):
    """
    Integrate over ``[0, t_f]``; returns ``(status, count, times, ys, levels, branches, t_fail)``.

    Nodes are the RK4 steps of nominal size ``t_f/n_steps`` restarted at
    every located event.
    """
    n_steps = int(P[_NSTEPS])
    cap = 4 * n_steps + 64
    times = np.empty(cap)
    ys = np.empty((cap, y0.shape[0]))
    levels = np.empty(cap, dtype=np.int64)
    branches = np.empty(cap, dtype=np.int64)
    if not (t_f > 0.0) or not math.isfinite(t_f):
        return BADTIME, 0, times, ys, levels, branches, 0.0
    dt_nom = t_f / n_steps
    y = y0.copy()
    t = 0.0
    branch = branch_of(y[10], y[11], y[12], P)
    level = initial_level(y, branch, P)
    times[0] = 0.0
    ys[0] = y
    levels[0] = level
    branches[0] = branch
    count = 1
    small_run = 1 if abs(psi(y, P)) <= P[_SINGTOL] else 0
    stalls = 0
    smooth = P[_SMOOTH] > 0.0
    pointing = P[_POINT] != 0.0
    while True:
        rem = t_f - t
        if rem <= 1e-13 * t_f:
            break
        last = rem <= dt_nom * (1.0 + 1e-9)
        dt = rem if last else dt_nom
        y1 = step(y, dt, level, branch, P)
        ev_psi = False
        ev_cone = False
        if not smooth:
            p1 = psi(y1, P)
            ev_psi = (level > 0 and p1 < 0.0) or (level < 0 and p1 > 0.0)
        if pointing:
            c1 = cone_margin(y1, P)
            ev_cone = (branch == INTERIOR and c1 < 0.0) or (branch != INTERIOR and c1 >= 0.0)
        if ev_psi or ev_cone:
            s_psi = 2.0 * dt
            s_cone = 2.0 * dt
            if ev_psi:
                g0 = psi(y, P)
                if g0 == 0.0 or (g0 > 0.0) == (p1 > 0.0):
                    s_psi = 0.0
                else:
                    s_psi = locate(0, y, dt, level, branch, P)
            if ev_cone:
                g0 = cone_margin(y, P)
                if g0 == 0.0 or (g0 >= 0.0) == (c1 >= 0.0):
                    s_cone = 0.0
                else:
                    s_cone = locate(1, y, dt, level, branch, P)
            s = min(s_psi, s_cone)
            if s > 0.0:
                y1 = step(y, s, level, branch, P)
                t = t_f if (last and s >= dt) else t + s
                stalls = 0
            else:
                y1 = y
                stalls += 1
                if stalls > 4:
                    return CHATTER, count, times, ys, levels, branches, t
            if s_psi == s:
                level = -level
            if s_cone == s:
                if branch != INTERIOR:
                    branch = INTERIOR
                else:
                    hn = math.sqrt(y1[10] * y1[10] + y1[11] * y1[11])
                    branch = CONE if hn > 1e-12 * abs(y1[12]) else DEGENERATE
            if s == 0.0:
                levels[count - 1] = level
                branches[count - 1] = branch
                continue
        else:
            t = t_f if last else t + dt
        for i in range(y1.shape[0]):
            if not math.isfinite(y1[i]):
                return NONFINITE, count, times, ys, levels, branches, t
        if y1[6] <= P[_ME] and t < t_f * (1.0 - 1e-12):
            return FUEL, count, times, ys, levels, branches, t
        y = y1
        if count >= cap:
            return OVERFLOW, count, times, ys, levels, branches, t
        times[count] = t
        ys[count] = y
        levels[count] = level
        branches[count] = branch
        count += 1
        if not smooth:
            if abs(psi(y, P)) <= P[_SINGTOL]:
                small_run += 1
                if small_run >= 4:
                    return SINGULAR, count, times, ys, levels, branches, t
            else:
                small_run = 0
    return OK, count, times, ys, levels, branches, t
