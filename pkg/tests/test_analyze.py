import json
import math

from dataclasses import replace

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from pdlanding.analyze import (BOUNDARY_INTERVAL, CONTACT_POINT, Arc, Contact, StructureReport,
                               classify_arcs, detect_contacts, label_nodes, verify_feasibility,
                               verify_pmp, verify_structure)
from pdlanding.integrate import Trajectory, attach_diagnostics
from pdlanding.model import (MARS_VEHICLE, ConstraintSet, Scenario, State, VehicleParams,
                             mars_scenario)

MARS = VehicleParams(flow_rate=0.0, **MARS_VEHICLE)


def synthetic(throttles, t_f=10.0, h=None):
    n = len(throttles)
    t = np.linspace(0.0, t_f, n)
    states = np.zeros((n, 7))
    states[:, 2] = 100.0
    states[:, 6] = 1905.0
    dirs = np.tile([0.0, 0.0, 1.0], (n, 1))
    return Trajectory(t, states, dirs, np.asarray(throttles, dtype=float),
                      h=None if h is None else np.asarray(h, dtype=float))


def levels(*runs):
    return np.concatenate([np.full(k, a) for a, k in runs])


def test_constant_max_throttle_is_one_arc():
    arcs = classify_arcs(synthetic(np.full(20, 0.8)), MARS)
    assert [a.kind for a in arcs] == ["Max"]
    assert arcs[0].t_end == 10.0


def test_min_max_is_accepted():
    report = StructureReport(classify_arcs(synthetic(levels((0.3, 10), (0.8, 10))), MARS), [])
    assert report.structure == "Min-Max"
    assert verify_structure(report, mars_scenario())["arc_structure"].status == "pass"


def test_extra_arc_is_a_structure_violation():
    traj = synthetic(levels((0.8, 10), (0.3, 10), (0.8, 10), (0.3, 10)))
    report = StructureReport(classify_arcs(traj, MARS), [])
    v = verify_structure(report, mars_scenario())["arc_structure"]
    assert v.status == "fail" and v.message.startswith("structure violation")


def test_wide_interior_throttle_is_only_a_warning():
    traj = synthetic(levels((0.8, 10), (0.55, 10), (0.3, 10), (0.8, 10), (0.3, 10)))
    report = StructureReport(classify_arcs(traj, MARS), [])
    v = verify_structure(report, mars_scenario(), interior_fraction=0.2)["arc_structure"]
    assert v.status == "warn" and "possible singular/chattering region" in v.message


def test_isolated_transition_node_is_absorbed():
    arcs = classify_arcs(synthetic(levels((0.8, 10), (0.55, 1), (0.3, 10))), MARS)
    assert [a.kind for a in arcs] == ["Max", "Min"]


def test_no_contact_far_from_the_constraint():
    traj = synthetic(np.full(20, 0.8), h=np.full(20, 10.0))
    assert detect_contacts(traj, classify_arcs(traj, MARS)) == []


def test_riding_the_constraint_is_a_boundary_interval():
    t = np.linspace(0.0, 20.0, 81)
    h = np.where((t >= 5.0) & (t <= 10.0), 0.0, np.minimum(np.abs(t - 5.0), np.abs(t - 10.0)) + 1.0)
    traj = synthetic(np.full(81, 0.8), t_f=20.0, h=h)
    contacts = detect_contacts(traj, classify_arcs(traj, MARS))
    assert len(contacts) == 1
    c = contacts[0]
    assert c.kind == BOUNDARY_INTERVAL
    assert (c.t_start, c.t_end) == (5.0, 10.0)


def test_touch_and_go_is_a_contact_point():
    t = np.linspace(0.0, 20.0, 81)
    h = 4.0 * np.abs(t - 7.0)
    h[-1] = 0.0
    traj = synthetic(np.full(81, 0.8), t_f=20.0, h=h)
    contacts = detect_contacts(traj, classify_arcs(traj, MARS))
    assert [c.kind for c in contacts] == [CONTACT_POINT, CONTACT_POINT]
    assert contacts[0].t_start == 7.0 and contacts[1].final


def constrained_report(contacts, throttle_min=0.3, pointing=None):
    params = VehicleParams(flow_rate=0.0, **dict(MARS_VEHICLE, throttle_min=throttle_min))
    cons = ConstraintSet(glide_slope_angle=0.0, glide_slope_enabled=True,
                         pointing_half_angle=math.radians(pointing or 0.0),
                         pointing_enabled=pointing is not None)
    sc = Scenario(params, cons, State([2000, 0, 1500], [100, 0, -75], 1905.0))
    arcs = [Arc("Max", 0, 40), Arc("Min", 40, 60), Arc("Max", 60, 80)]
    return verify_structure(StructureReport(arcs, [40, 60], contacts), sc)


def contact(t, arc, kind="Max", final=False, throttle=0.8):
    return Contact(t, t, CONTACT_POINT, kind, arc, final, 0.0, throttle)


def test_two_contacts_allowed_when_min_thrust_cannot_hold_weight():
    # 0.3 * 16573 = 4971.9 < 1905 * 3.71 = 7067.55
    v = constrained_report([contact(30, 0), contact(80, 2, final=True)])
    assert v["contact_total"].status == "pass"
    assert v["contact_total"].message.endswith("limit 2")
    assert v["min_arc_contact"].status == "pass"
    assert v["contact_force"].status == "pass"


def test_second_contact_on_one_arc_fails():
    v = constrained_report([contact(10, 0), contact(30, 0)])
    assert v["contacts_per_arc"].status == "fail"


def test_min_arc_interior_contact_fails():
    v = constrained_report([contact(50, 1, kind="Min", throttle=0.3)])
    assert v["min_arc_contact"].status == "fail"


def test_only_final_contact_when_min_thrust_lifts_the_vehicle():
    # 0.75 * cos(10 deg) * 16573 = 12241 >= 7067.55
    v = constrained_report([contact(30, 0), contact(80, 2, final=True)], throttle_min=0.75, pointing=10.0)
    assert v["contact_total"].status == "fail"
    assert v["contact_total"].message == "only the final point may be a contact"
    v = constrained_report([contact(80, 2, final=True)], throttle_min=0.75, pointing=10.0)
    assert v["contact_total"].status == "pass"


def test_contact_force_inequality():
    # m_e g cos(0) = 5583.55 N; 0.3 * 16573 = 4971.9 N is short by more than 1e-3 m_e g
    v = constrained_report([contact(30, 0, throttle=0.3)])
    assert v["contact_force"].status == "fail"


def test_converged_extremal_passes_every_check(indirect_2d):
    _, report = indirect_2d
    assert all(v.status in ("pass", "skipped") for v in report.verdicts.values())


def test_injected_throttle_flip_breaks_psi_sign(indirect_2d):
    traj, report = indirect_2d
    i = int(np.flatnonzero(traj.psi < -1e-3)[5])
    thr = traj.throttles.copy()
    thr[i] = 0.8
    v = verify_pmp(replace(traj, throttles=thr), mars_scenario(), report.arcs)["psi_sign"]
    assert v.status == "fail" and v.message.startswith("psi-sign mismatch at t=")


def test_non_generic_singular_arc_is_flagged():
    sc = Scenario(MARS, ConstraintSet(), State([2000, 0, 1500], [100, 50, -75], 1905.0))
    n = 31
    t = np.linspace(0.0, 30.0, n)
    thr = levels((0.8, 10), (0.55, 11), (0.8, 10))
    costates = np.zeros((n, 7))
    costates[:, 0] = 1.0
    costates[:, 3] = 1.0 + t
    costates[:, 5] = 1.0
    states = np.zeros((n, 7))
    states[:, 6] = 1905.0
    traj = attach_diagnostics(Trajectory(t, states, np.tile([0, 0, 1.0], (n, 1)), thr,
                                         costates=costates, mu_accum=np.zeros((n, 3))), sc)
    arcs = classify_arcs(traj, MARS)
    assert [a.kind for a in arcs] == ["Max", "Singular", "Max"]
    v = verify_pmp(traj, sc, arcs)["singular_arcs"]
    assert v.status == "warn" and v.message == "non-generic singular arc: inspect"


def test_no_costates_means_pmp_checks_skipped():
    traj = attach_diagnostics(synthetic(np.full(20, 0.8)), mars_scenario())
    assert {v.status for v in verify_pmp(traj, mars_scenario()).values()} == {"skipped"}


def test_cone_violation_is_reported():
    sc = mars_scenario(pointing_deg=10.0)
    traj = synthetic(np.full(20, 0.8))
    dirs = traj.directions.copy()
    dirs[7] = [math.sin(0.5), 0.0, math.cos(0.5)]
    traj = attach_diagnostics(replace(traj, directions=dirs), sc)
    v = verify_feasibility(traj, sc)["pointing"]
    assert v.status == "fail" and v.message.startswith("pointing violation at t=")


def test_report_json_round_trip(indirect_2d):
    _, report = indirect_2d
    back = StructureReport.from_dict(json.loads(report.to_json()))
    assert back.structure == report.structure
    assert back.switching_times == report.switching_times
    assert {k: v.status for k, v in back.verdicts.items()} == {k: v.status for k, v in report.verdicts.items()}


throttle_runs = st.lists(st.tuples(st.sampled_from([0.3, 0.8, 0.55]), st.integers(2, 8)),
                         min_size=1, max_size=6)


@settings(max_examples=200, deadline=None)
@given(throttle_runs)
def test_classification_is_idempotent(runs):
    traj = synthetic(levels(*runs), t_f=float(len(levels(*runs))))
    arcs = classify_arcs(traj, MARS)
    # snap Max/Min nodes onto their bound; the arcs must not move
    snap = {"Max": 0.8, "Min": 0.3}
    thr = np.array([snap.get(lab, a) for lab, a in zip(label_nodes(traj.throttles, MARS), traj.throttles)])
    assert classify_arcs(replace(traj, throttles=thr), MARS) == arcs


@settings(max_examples=200, deadline=None)
@given(throttle_runs)
def test_classification_survives_grid_refinement(runs):
    thr = levels(*runs)
    traj = synthetic(thr, t_f=float(len(thr) - 1))
    fine = np.repeat(thr, 2)[:-1]
    fine_traj = synthetic(fine, t_f=float(len(thr) - 1))
    coarse, refined = classify_arcs(traj, MARS), classify_arcs(fine_traj, MARS)
    assert [a.kind for a in coarse] == [a.kind for a in refined]
    for a, b in zip(coarse, refined):
        assert abs(a.t_end - b.t_end) <= 1.0


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(-1.0, 5.0), min_size=5, max_size=60))
def test_contacts_are_sorted_and_disjoint(h):
    traj = synthetic(np.full(len(h), 0.8), t_f=float(len(h)), h=np.abs(h))
    contacts = detect_contacts(traj, classify_arcs(traj, MARS))
    for c in contacts:
        assert c.t_start <= c.t_end
    for a, b in zip(contacts, contacts[1:]):
        assert a.t_end < b.t_start
