"""
Structure verification of landing trajectories.

The throttle profile is cut into Max/Min/Singular arcs, glide-slope contacts
are located, and a set of named checks is evaluated. Every check produces a
``Verdict`` with status ``pass``, ``fail``, ``warn`` or ``skipped`` and the
measured margin, so a report can be audited without rerunning the solver.
"""

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .integrate import Trajectory
from .model import Scenario, VehicleParams
from .pmp import _direction, control_law, hamiltonian, mass_multiplier_target, psi_rate

MAX, MIN, SINGULAR = "Max", "Min", "Singular"
CONTACT_POINT, BOUNDARY_INTERVAL = "contact_point", "boundary_interval"
STATUSES = ("pass", "fail", "warn", "skipped")

# contiguous sub-patterns of the two admissible throttle profiles
ALLOWED_SEQUENCES = frozenset({
    (MAX,), (MIN,), (SINGULAR,),
    (MAX, MIN), (MIN, MAX), (MAX, MIN, MAX),
    (MAX, SINGULAR), (SINGULAR, MAX), (MAX, SINGULAR, MAX),
})

INTERIOR_THROTTLE_MARGIN = 0.02
INTERIOR_THROTTLE_FRACTION = 0.05


@dataclass(frozen=True)
class Arc:
    kind: str
    t_start: float
    t_end: float

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


@dataclass(frozen=True)
class Contact:
    """A glide-slope contact point (``t_start == t_end``) or boundary interval."""

    t_start: float
    t_end: float
    kind: str
    arc_kind: str
    arc_index: int
    final: bool
    h_min: float
    throttle: float


@dataclass(frozen=True)
class Verdict:
    status: str
    margin: Optional[float] = None
    message: str = ""

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown verdict status {self.status!r}")


@dataclass
class StructureReport:
    arcs: List[Arc]
    switching_times: List[float]
    contacts: List[Contact] = field(default_factory=list)
    verdicts: Dict[str, Verdict] = field(default_factory=dict)
    degenerate_flags: List[Tuple[float, float]] = field(default_factory=list)
    solver: Dict[str, Verdict] = field(default_factory=dict)

    @property
    def sequence(self) -> Tuple[str, ...]:
        return tuple(a.kind for a in self.arcs)

    @property
    def structure(self) -> str:
        """Compact label such as ``Max-Min-Max``."""
        return "-".join(self.sequence)

    def describe(self) -> str:
        """Arc list with times, e.g. ``Max(0.00-49.14) Min(49.14-66.85) ...``."""
        return " ".join(f"{a.kind}({a.t_start:.2f}-{a.t_end:.2f})" for a in self.arcs)

    @property
    def passed(self) -> bool:
        """True when no analysis verdict failed (solver verdicts excluded)."""
        return not self.failures()

    @property
    def converged(self) -> bool:
        return all(v.status != "fail" for v in self.solver.values())

    def failures(self) -> List[str]:
        return [k for k, v in self.verdicts.items() if v.status == "fail"]

    def to_dict(self) -> dict:
        return {
            "structure": self.structure,
            "arcs": [asdict(a) for a in self.arcs],
            "switching_times": list(self.switching_times),
            "contacts": [asdict(c) for c in self.contacts],
            "verdicts": {k: asdict(v) for k, v in self.verdicts.items()},
            "degenerate_flags": [list(f) for f in self.degenerate_flags],
            "solver": {k: asdict(v) for k, v in self.solver.items()},
            "converged": self.converged,
            "passed": self.passed,
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=indent)

    @classmethod
    def from_dict(cls, data: dict) -> "StructureReport":
        return cls(
            arcs=[Arc(**a) for a in data["arcs"]],
            switching_times=[float(t) for t in data["switching_times"]],
            contacts=[Contact(**c) for c in data.get("contacts", [])],
            verdicts={k: Verdict(**v) for k, v in data.get("verdicts", {}).items()},
            degenerate_flags=[tuple(f) for f in data.get("degenerate_flags", [])],
            solver={k: Verdict(**v) for k, v in data.get("solver", {}).items()},
        )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# ---------------------------------------------------------------------------
# arcs
# ---------------------------------------------------------------------------

def default_norm_tol(params: VehicleParams) -> float:
    return 0.02 * (params.throttle_max - params.throttle_min)


def label_nodes(throttles, params: VehicleParams, norm_tol: Optional[float] = None) -> List[str]:
    if norm_tol is None:
        norm_tol = default_norm_tol(params)
    out = []
    for a in np.asarray(throttles, dtype=float):
        if abs(a - params.throttle_max) <= norm_tol:
            out.append(MAX)
        elif abs(a - params.throttle_min) <= norm_tol:
            out.append(MIN)
        else:
            out.append(SINGULAR)
    return out


def _level(kind: str, params: VehicleParams) -> float:
    if kind == MAX:
        return params.throttle_max
    if kind == MIN:
        return params.throttle_min
    return 0.5 * (params.throttle_min + params.throttle_max)


def _runs(labels: Sequence[str]) -> List[list]:
    runs = []
    for i, lab in enumerate(labels):
        if runs and runs[-1][0] == lab:
            runs[-1][2] = i
        else:
            runs.append([lab, i, i])
    return runs


def _absorb_isolated(runs: List[list], throttles, params: VehicleParams) -> List[list]:
    """Merge single-node runs into the neighbour whose level is closest."""
    runs = [list(r) for r in runs]
    while len(runs) > 1:
        idx = next((k for k, r in enumerate(runs) if r[1] == r[2]), None)
        if idx is None:
            break
        a = throttles[runs[idx][1]]
        cands = [k for k in (idx - 1, idx + 1) if 0 <= k < len(runs)]
        target = min(cands, key=lambda k: (abs(a - _level(runs[k][0], params)), k))
        runs[idx][0] = runs[target][0]
        merged = []
        for r in runs:
            if merged and merged[-1][0] == r[0]:
                merged[-1][2] = r[2]
            else:
                merged.append(r)
        runs = merged
    return runs


def _boundary_time(traj: Trajectory, j: int, params: VehicleParams) -> float:
    """Switch time between node ``j`` and ``j + 1``: root of the switching function when known, else throttle midpoint."""
    t0, t1 = traj.times[j], traj.times[j + 1]
    psi = traj.psi
    if psi is not None and np.isfinite(psi[j]) and np.isfinite(psi[j + 1]):
        p0, p1 = psi[j], psi[j + 1]
        scale = np.nanmax(np.abs(psi))
        tiny = 1e-9 * scale
        if p0 != p1 and (p0 * p1 <= 0.0 or abs(p0) <= tiny or abs(p1) <= tiny):
            frac = min(max(p0 / (p0 - p1), 0.0), 1.0)
            return float(t0 + frac * (t1 - t0))
    a0, a1 = traj.throttles[j], traj.throttles[j + 1]
    mid = 0.5 * (params.throttle_min + params.throttle_max)
    frac = 0.5 if a1 == a0 else min(max((mid - a0) / (a1 - a0), 0.0), 1.0)
    return float(t0 + frac * (t1 - t0))


def classify_arcs(traj: Trajectory, params: VehicleParams,
                  norm_tol: Optional[float] = None) -> List[Arc]:
    """
    Split the throttle profile into Max, Min and Singular arcs.

    Parameters
    ----------
    traj : Trajectory
    params : VehicleParams
        Supplies the throttle bounds.
    norm_tol : float, optional
        Distance to a bound under which a node is labelled Max or Min.
        Defaults to ``0.02 * (u_max - u_min)``.

    Returns
    -------
    list of Arc
        Arcs tile ``[0, t_f]``. Single-node runs are absorbed into a
        neighbour, which removes grid-level transition samples.
    """
    labels = label_nodes(traj.throttles, params, norm_tol)
    runs = _absorb_isolated(_runs(labels), traj.throttles, params)
    arcs = []
    t_prev = 0.0
    for k, (kind, _, end) in enumerate(runs):
        t_end = traj.t_f if k == len(runs) - 1 else _boundary_time(traj, end, params)
        arcs.append(Arc(kind, t_prev, t_end))
        t_prev = t_end
    return arcs


def arc_index_at(arcs: Sequence[Arc], t: float) -> int:
    for k, a in enumerate(arcs):
        if t <= a.t_end:
            return k
    return len(arcs) - 1


# ---------------------------------------------------------------------------
# contacts
# ---------------------------------------------------------------------------

def detect_contacts(traj: Trajectory, arcs: Sequence[Arc], h_tol: float = 0.5,
                    active_tol: float = 1e-3, min_active_nodes: int = 3) -> List[Contact]:
    """
    Maximal runs of nodes with ``|h| <= h_tol``.

    A run is a boundary interval when it holds at least
    ``min_active_nodes`` consecutive nodes with ``|h| <= active_tol``
    (the trajectory rides the constraint); otherwise it is a contact point
    placed at the node of smallest ``|h|``.
    """
    if traj.h is None or not np.any(np.isfinite(traj.h)):
        raise ValueError("trajectory has no glide-slope values")
    h = np.asarray(traj.h, dtype=float)
    near = np.abs(h) <= h_tol
    n = len(h)
    out = []
    i = 0
    while i < n:
        if not near[i]:
            i += 1
            continue
        k = i
        while k + 1 < n and near[k + 1]:
            k += 1
        seg = np.abs(h[i:k + 1])
        best = i + int(np.argmin(seg))
        active = seg <= active_tol
        start, length, bstart, blen = None, 0, None, 0
        for j, flag in enumerate(active):
            if flag:
                if start is None:
                    start, length = j, 0
                length += 1
                if length > blen:
                    bstart, blen = start, length
            else:
                start = None
        if blen >= min_active_nodes:
            t0, t1 = traj.times[i + bstart], traj.times[i + bstart + blen - 1]
            kind = BOUNDARY_INTERVAL
        else:
            t0 = t1 = traj.times[best]
            kind = CONTACT_POINT
        final = k == n - 1
        idx = len(arcs) - 1 if final else arc_index_at(arcs, 0.5 * (t0 + t1))
        out.append(Contact(float(t0), float(t1), kind, arcs[idx].kind, idx, final,
                           float(h[best]), float(traj.throttles[best])))
        i = k + 1
    return out


# ---------------------------------------------------------------------------
# verdicts
# ---------------------------------------------------------------------------

def interior_throttle_fraction(throttles, params: VehicleParams,
                               margin: float = INTERIOR_THROTTLE_MARGIN) -> float:
    a = np.asarray(throttles, dtype=float)
    inside = (a > params.throttle_min + margin) & (a < params.throttle_max - margin)
    return float(np.mean(inside))


def verify_structure(report: StructureReport, scenario: Scenario,
                     interior_fraction: float = 0.0) -> Dict[str, Verdict]:
    """
    Arc-sequence and contact-count checks.

    ``interior_fraction`` is the share of nodes with a throttle strictly
    between the bounds; above 5 % an inadmissible sequence is reported as a
    possible singular or chattering region (``warn``) rather than a failure.
    """
    p = scenario.params
    c = scenario.constraints
    m0 = scenario.initial_state.mass
    out = {}

    seq = report.sequence
    if seq in ALLOWED_SEQUENCES:
        out["arc_structure"] = Verdict("pass", None, report.structure)
    elif interior_fraction > INTERIOR_THROTTLE_FRACTION:
        out["arc_structure"] = Verdict("warn", interior_fraction,
                                       f"possible singular/chattering region: {report.structure}")
    else:
        out["arc_structure"] = Verdict("fail", None, f"structure violation: {report.structure}")

    if not c.glide_slope_enabled:
        for name in ("contacts_per_arc", "contact_total", "min_arc_contact", "contact_force"):
            out[name] = Verdict("skipped", None, "glide-slope constraint disabled")
        return out

    contacts = report.contacts
    interior = [k for k in contacts if not k.final]
    constant_mass = p.flow_rate == 0.0

    per_arc = {}
    for k in contacts:
        if k.arc_kind in (MAX, MIN):
            per_arc[k.arc_index] = per_arc.get(k.arc_index, 0) + 1
    worst = max(per_arc.values(), default=0)
    if not constant_mass:
        out["contacts_per_arc"] = Verdict("skipped", float(worst),
                                          "bound proven for constant mass only")
    else:
        out["contacts_per_arc"] = Verdict("pass" if worst <= 1 else "fail", float(worst),
                                          f"at most {worst} contact(s) on a Max or Min arc")

    weight_ratio = m0 * p.gravity / p.thrust_max
    if not constant_mass:
        out["contact_total"] = Verdict("skipped", float(len(contacts)),
                                       "bound proven for constant mass only")
    else:
        cos_t = math.cos(c.pointing_half_angle) if c.pointing_enabled else 0.0
        if p.throttle_min * cos_t >= weight_ratio:
            ok = not interior
            msg = "only the final point may be a contact"
            limit = 0
        else:
            limit = 2 if p.throttle_min < weight_ratio else 3
            ok = len(contacts) <= limit
            msg = f"{len(contacts)} contact(s), limit {limit}"
        out["contact_total"] = Verdict("pass" if ok else "fail", float(len(contacts)), msg)

    m_ref = m0 if constant_mass else p.mass_empty
    if p.throttle_min * p.thrust_max < m_ref * p.gravity:
        bad = [k for k in interior if k.arc_kind == MIN]
        out["min_arc_contact"] = Verdict(
            "fail" if bad else "pass", float(len(bad)),
            f"interior contact on a Min arc at t={bad[0].t_start:.6g}" if bad
            else "no interior contact on a Min arc")
    else:
        out["min_arc_contact"] = Verdict("skipped", None, "minimum thrust can hold the weight")

    if interior:
        need = p.mass_empty * p.gravity * math.cos(c.glide_slope_angle)
        margins = [p.thrust_max * k.throttle - need for k in interior]
        worst_m = min(margins)
        tol = 1e-3 * p.mass_empty * p.gravity
        out["contact_force"] = Verdict("pass" if worst_m >= -tol else "fail", float(worst_m),
                                       f"min T|u| - m_e g cos(gamma) over {len(interior)} interior contact(s)")
    else:
        out["contact_force"] = Verdict("skipped", None, "no interior contact")
    return out


def verify_feasibility(traj: Trajectory, scenario: Scenario, h_tol: float = 0.5,
                       bc_tol: float = 1e-3) -> Dict[str, Verdict]:
    """Control bounds, pointing cone, glide slope, boundary values and mass bookkeeping."""
    p = scenario.params
    c = scenario.constraints
    out = {}
    a = traj.throttles
    norm_err = np.abs(np.linalg.norm(traj.directions, axis=1) - 1.0)
    lo = float(np.min(a - p.throttle_min))
    hi = float(np.min(p.throttle_max - a))
    ok = lo >= -1e-9 and hi >= -1e-9 and float(norm_err.max()) <= 1e-9
    out["control_bounds"] = Verdict("pass" if ok else "fail", min(lo, hi),
                                    "throttle within bounds and unit direction" if ok
                                    else "throttle or direction norm out of bounds")

    if c.pointing_enabled:
        slack = traj.directions[:, 2] - math.cos(c.pointing_half_angle)
        i = int(np.argmin(slack))
        ok = slack[i] >= -1e-9
        out["pointing"] = Verdict("pass" if ok else "fail", float(slack[i]),
                                  "thrust inside the pointing cone" if ok
                                  else f"pointing violation at t={traj.times[i]:.6g}")
    else:
        out["pointing"] = Verdict("skipped", None, "pointing constraint disabled")

    if c.glide_slope_enabled:
        i = int(np.argmin(traj.h))
        ok = traj.h[i] >= -h_tol
        out["glide_slope"] = Verdict("pass" if ok else "fail", float(traj.h[i]),
                                     "glide slope respected" if ok
                                     else f"glide-slope violation at t={traj.times[i]:.6g}")
    else:
        out["glide_slope"] = Verdict("skipped", None, "glide-slope constraint disabled")

    s0 = scenario.initial_state.as_array()
    err0 = float(np.max(np.abs(traj.states[0] - s0)))
    xf = traj.states[-1]
    if scenario.pinpoint:
        target = np.concatenate([scenario.final_position_xy, [scenario.final_altitude]])
        errf = float(max(np.max(np.abs(xf[0:3] - target)), np.max(np.abs(xf[3:6]))))
    else:
        errf = float(max(abs(xf[2] - scenario.final_altitude), abs(xf[5])))
    err = max(err0, errf)
    out["boundary_conditions"] = Verdict("pass" if err <= bc_tol else "fail", err,
                                         "initial and final conditions met" if err <= bc_tol
                                         else "boundary condition mismatch")

    m = traj.states[:, 6]
    m0 = m[0]
    fuel = traj.fuel_integral()
    resid = abs(m[-1] - m0 + p.flow_rate * fuel)
    if traj.fuel_trace is not None:
        resid = max(resid, float(np.max(np.abs(m - m0 + p.flow_rate * traj.fuel_trace))))
    ok = resid <= 1e-6 * m0
    out["mass_bookkeeping"] = Verdict("pass" if ok else "fail", float(resid),
                                      "mass consistent with the throttle integral" if ok
                                      else "mass does not match the throttle integral")
    margin = float(m[-1] - p.mass_empty)
    early = m[:-1] <= p.mass_empty
    if np.any(early) or margin < 0.0:
        i = int(np.argmax(early)) if np.any(early) else len(m) - 1
        out["dry_mass"] = Verdict("fail", margin, f"fuel exhausted at t={traj.times[i]:.6g}")
    else:
        out["dry_mass"] = Verdict("pass", margin, "mass stays above the dry mass")
    return out


@dataclass(frozen=True)
class PmpTolerances:
    """Tolerances of the maximum-principle checks (``scale`` loosens all of them)."""

    psi_gap: float = 1e-6
    monotone: float = 1e-8
    psi_rate: float = 1e-3
    transversality: float = 1e-6
    collinear: float = 1e-6
    scale: float = 1.0


def _central_difference(t, f, i):
    h0 = t[i] - t[i - 1]
    h1 = t[i + 1] - t[i]
    return (h0 * h0 * f[i + 1] - h1 * h1 * f[i - 1] + (h1 * h1 - h0 * h0) * f[i]) / (h0 * h1 * (h0 + h1))


def _branch_codes(traj: Trajectory, scenario: Scenario) -> np.ndarray:
    c = scenario.constraints
    return np.array([_direction(pv, c.pointing_half_angle, c.pointing_enabled)[1]
                     for pv in traj.costates[:, 3:6]])


def degenerate_intervals(traj: Trajectory, scenario: Scenario) -> List[Tuple[float, float]]:
    """Time spans where the direction maximizer is not unique (two or more consecutive nodes)."""
    if traj.costates is None:
        return []
    codes = _branch_codes(traj, scenario)
    out = []
    for kind, i, k in _runs(list(codes)):
        if kind == 2 and k > i:
            out.append((float(traj.times[i]), float(traj.times[k])))
    return out


def verify_pmp(traj: Trajectory, scenario: Scenario, arcs: Optional[Sequence[Arc]] = None,
               tol: PmpTolerances = PmpTolerances()) -> Dict[str, Verdict]:
    """
    Checks derived from the maximum principle.

    All verdicts are ``skipped`` when the trajectory carries no costates.
    ``<q_r, d>`` monotonicity is measured relative to ``max |q_r|``; the
    switching-function rate is compared with its analytic value relative to
    the largest analytic rate on the trajectory, at nodes whose stencil
    does not straddle a throttle switch or a change of direction branch.
    """
    names = ("psi_sign", "qr_monotone", "psi_rate", "transversality",
             "mass_multiplier_increasing", "singular_arcs", "degenerate_direction")
    if traj.costates is None:
        return {k: Verdict("skipped", None, "no costates") for k in names}
    p = scenario.params
    c = scenario.constraints
    k = tol.scale
    t = traj.times
    m = traj.states[:, 6]
    n = len(t)
    out = {}

    psi = traj.psi
    gap = tol.psi_gap * p.thrust_max / m[0]
    bad = []
    for i in range(n):
        if abs(psi[i]) <= gap:
            continue
        want = p.throttle_max if psi[i] > 0.0 else p.throttle_min
        if abs(traj.throttles[i] - want) > 1e-9:
            bad.append(i)
    out["psi_sign"] = Verdict("fail" if bad else "pass", float(len(bad)),
                              f"psi-sign mismatch at t={t[bad[0]]:.6g}" if bad
                              else "throttle follows the sign of psi")

    qr = traj.q_r
    scale = max(float(np.max(np.linalg.norm(qr, axis=1))), 1e-300)
    rises = np.diff(traj.qr_dot_d) / scale
    worst = float(max(rises.max(initial=0.0), 0.0))
    ok = worst <= tol.monotone * k
    out["qr_monotone"] = Verdict("pass" if ok else "fail", worst,
                                 "<q_r, d> nonincreasing" if ok else "<q_r, d> increases")

    codes = _branch_codes(traj, scenario)
    rate = np.array([psi_rate(traj.state(i), traj.costate(i), traj.directions[i], p) for i in range(n)])
    rate_scale = max(float(np.max(np.abs(rate))), 1e-300)
    dt_nom = t[-1] / max(n - 1, 1)
    errs = []
    for i in range(1, n - 1):
        if min(t[i] - t[i - 1], t[i + 1] - t[i]) < 1e-3 * dt_nom:
            continue
        a3 = traj.throttles[i - 1:i + 2]
        if np.ptp(a3) > 0.0 or np.ptp(codes[i - 1:i + 2]) != 0:
            continue
        errs.append(abs(_central_difference(t, psi, i) - rate[i]) / rate_scale)
    if errs:
        worst = float(max(errs))
        ok = worst <= tol.psi_rate * k
        out["psi_rate"] = Verdict("pass" if ok else "fail", worst,
                                  f"finite-difference dpsi/dt over {len(errs)} nodes")
    else:
        out["psi_rate"] = Verdict("skipped", None, "no smooth stencil")

    out["transversality"] = _transversality(traj, scenario, tol.transversality * k)

    if p.pressure_term > 0.0:
        dpm = np.diff(traj.costates[:, 6])
        worst = float(dpm.min())
        out["mass_multiplier_increasing"] = Verdict("pass" if worst > 0.0 else "fail", worst,
                                                    "p_m strictly increasing" if worst > 0.0
                                                    else "p_m not increasing")
    else:
        out["mass_multiplier_increasing"] = Verdict("skipped", None, "vacuum model")

    out["singular_arcs"] = _singular_check(traj, scenario, arcs, tol.collinear * k)

    flags = degenerate_intervals(traj, scenario)
    out["degenerate_direction"] = Verdict(
        "warn" if flags else "pass", float(sum(b - a for a, b in flags)),
        "time spent with a non-unique thrust direction" if flags else "direction maximizer unique")
    return out


def _transversality(traj: Trajectory, scenario: Scenario, tol: float) -> Verdict:
    p = scenario.params
    i = len(traj) - 1
    state = traj.state(i)
    costate = traj.costate(i)
    parts = [abs(costate.p_m - mass_multiplier_target(scenario.cost, p.flow_rate))
             / max(1.0, abs(mass_multiplier_target(scenario.cost, p.flow_rate)))]
    if scenario.final_time is None:
        ctrl, _ = control_law(state, costate, scenario.constraints, p)
        dl_dt = 1.0 if scenario.cost == "min_time" else 0.0
        parts.append(abs(hamiltonian(state, costate, ctrl, p) - dl_dt))
    if not scenario.pinpoint:
        c_v = scenario.initial_state.mass / p.thrust_max
        parts.append(float(np.max(np.abs(costate.q_r[0:2]))) / c_v * traj.t_f)
        parts.append(float(np.max(np.abs(costate.p_v[0:2]))) / c_v)
    worst = float(max(parts))
    return Verdict("pass" if worst <= tol else "fail", worst, "final adjoint conditions")


def _det2(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def _singular_check(traj: Trajectory, scenario: Scenario, arcs, tol: float) -> Verdict:
    s0 = scenario.initial_state
    r, v = s0.position[0:2], s0.velocity[0:2]
    init = abs(_det2(r, v)) / max(np.linalg.norm(r) * np.linalg.norm(v), 1e-300)
    sing = [a for a in (arcs or []) if a.kind == SINGULAR]
    if not sing:
        return Verdict("pass", init, f"no singular arc; initial |det((x,y),(vx,vy))| = {init:.3g}")
    qr = traj.q_r
    worst = 0.0
    for a in sing:
        sel = (traj.times >= a.t_start) & (traj.times <= a.t_end)
        for pv, q in zip(traj.costates[sel, 3:5], qr[sel, 0:2]):
            den = max(np.linalg.norm(pv) * np.linalg.norm(q), 1e-300)
            worst = max(worst, abs(_det2(pv, q)) / den)
    if worst > tol:
        return Verdict("fail", worst, "horizontal p_v and q_r not collinear on a singular arc")
    if init > tol:
        return Verdict("warn", init, "non-generic singular arc: inspect")
    return Verdict("pass", init, "singular arc with collinear initial conditions")


def analyze_trajectory(traj: Trajectory, scenario: Scenario, norm_tol: Optional[float] = None,
                       h_tol: float = 0.5, pmp_tol: PmpTolerances = PmpTolerances()) -> StructureReport:
    """Classify, locate contacts and run every check on one trajectory."""
    p = scenario.params
    arcs = classify_arcs(traj, p, norm_tol)
    contacts = detect_contacts(traj, arcs, h_tol) if scenario.constraints.glide_slope_enabled else []
    report = StructureReport(arcs, [a.t_end for a in arcs[:-1]], contacts,
                             degenerate_flags=degenerate_intervals(traj, scenario))
    verdicts = {}
    verdicts.update(verify_feasibility(traj, scenario, h_tol))
    verdicts.update(verify_structure(report, scenario,
                                     interior_throttle_fraction(traj.throttles, p)))
    verdicts.update(verify_pmp(traj, scenario, arcs, pmp_tol))
    report.verdicts = verdicts
    return report

