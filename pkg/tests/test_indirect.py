import numpy as np
import pytest

from pdlanding.analyze import classify_arcs
from pdlanding.indirect import (ShootingUnknowns, SingularArcError, default_guess, shoot,
                                solve_indirect, switching_times)
from pdlanding.model import MARS_FLOW_RATE, mars_scenario, vertical_scenario


def bang_bang_oracle(z0=1500.0, vz0=-75.0, m=1905.0, T=16573.0, g=3.71, umin=0.3, umax=0.8):
    """
    Min-then-Max vertical descent to rest at z = 0.

    Accelerations are constant on each arc, so the switching time is the
    root of ``z(t1) - vz(t1)^2 / (2 a_max)``, found by plain bisection.
    """
    a_lo, a_hi = T * umin / m - g, T * umax / m - g

    def gap(t1):
        v1 = vz0 + a_lo * t1
        z1 = z0 + vz0 * t1 + 0.5 * a_lo * t1 * t1
        return z1 - v1 * v1 / (2.0 * a_hi)

    lo, hi = 0.0, 60.0
    assert gap(lo) > 0.0 > gap(hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if gap(mid) > 0.0 else (lo, mid)
    t1 = 0.5 * (lo + hi)
    return t1, t1 - (vz0 + a_lo * t1) / a_hi


def oracle_unknowns(m=1905.0, T=16573.0, g=3.71, umin=0.3, umax=0.8):
    """
    Initial adjoint of the 1-D extremal.

    ``p_vz`` is linear in time with ``Psi = (T/m) p_vz - 1`` vanishing at
    ``t1`` and ``H(t_f) = 0``. ``p_m`` has rate ``T a p_vz / m^2`` and ends
    at zero, so its initial value is minus the integral of that rate
    (trapezoid rule is exact for a linear integrand).
    """
    t1, tf = bang_bang_oracle()
    p_switch = m / T
    p_final = umax / (umax * T / m - g)
    slope = (p_final - p_switch) / (tf - t1)
    p_start = p_switch - slope * t1
    growth = T / m ** 2 * (umin * 0.5 * (p_start + p_switch) * t1
                           + umax * 0.5 * (p_switch + p_final) * (tf - t1))
    return ShootingUnknowns([0, 0, -slope], [0, 0, p_start], -growth, tf)


def test_oracle_is_frozen():
    t1, tf = bang_bang_oracle()
    assert t1 == pytest.approx(6.0524, abs=1e-4)
    assert tf == pytest.approx(31.1796, abs=1e-4)


def test_oracle_unknowns_satisfy_boundary_conditions():
    res, traj = shoot(vertical_scenario(), oracle_unknowns())
    assert res.max_abs() <= 1e-8
    assert switching_times(traj)[0] == pytest.approx(bang_bang_oracle()[0], abs=1e-9)


def test_perturbed_unknowns_leave_a_residual():
    u = oracle_unknowns()
    u.p_v0 = u.p_v0 + 1e-3
    res, _ = shoot(vertical_scenario(), u)
    assert res.max_abs() > 0.0


def test_one_dimensional_solution(indirect_1d):
    traj, report = indirect_1d
    t1, tf = bang_bang_oracle()
    assert report.structure == "Min-Max"
    assert report.switching_times[0] == pytest.approx(t1, rel=1e-6)
    assert traj.t_f == pytest.approx(tf, rel=1e-6)
    assert traj.meta["residual"] <= 1e-8


def test_two_dimensional_solution(indirect_2d):
    traj, report = indirect_2d
    assert report.structure == "Max-Min-Max"
    assert report.passed and report.converged
    psi = traj.psi[np.abs(traj.psi) > 1e-9 * np.max(np.abs(traj.psi))]
    assert np.count_nonzero(np.diff(np.sign(psi))) == 2
    t1, t2 = report.switching_times
    assert np.all(traj.psi[traj.times < t1 - 1e-9] > 0)
    assert np.all(traj.psi[(traj.times > t1 + 1e-9) & (traj.times < t2 - 1e-9)] < 0)
    assert np.all(traj.psi[traj.times > t2 + 1e-9] > 0)


def test_converged_unknowns_are_a_fixed_point(indirect_2d):
    traj, _ = indirect_2d
    res, _ = shoot(mars_scenario(), traj.meta["unknowns"])
    assert res.max_abs() <= 1e-8


@pytest.mark.parametrize("sigma", [500.0, 2000.0])
def test_atmosphere_mass_multiplier_increases(sigma):
    traj, report = solve_indirect(mars_scenario(pressure_term=sigma))
    assert report.structure == "Max-Min-Max"
    assert np.all(np.diff(traj.costates[:, 6]) > 0.0)


def test_minimum_time_transversality():
    traj, report = solve_indirect(mars_scenario(cost="min_time"))
    assert report.structure == "Max"
    assert abs(traj.meta["residuals"].transversality) <= 1e-8
    assert report.verdicts["transversality"].status == "pass"


def test_varying_mass_solution():
    traj, report = solve_indirect(mars_scenario(flow_rate=MARS_FLOW_RATE))
    assert report.structure == "Max-Min-Max"
    assert traj.costates[-1, 6] == pytest.approx(1.0, abs=1e-8)


def test_vanishing_switching_function_is_refused():
    sc = mars_scenario(flow_rate=MARS_FLOW_RATE)
    with pytest.raises(SingularArcError):
        shoot(sc, ShootingUnknowns(np.zeros(3), np.zeros(3), 0.0, 60.0))


def test_default_guess_starts_on_a_max_arc():
    sc = mars_scenario()
    g = default_guess(sc)
    _, traj = shoot(sc, g)
    assert classify_arcs(traj, sc.params)[0].kind == "Max"


def test_same_seed_same_answer():
    a, _ = solve_indirect(mars_scenario(pointing_deg=45.0), seed=3)
    b, _ = solve_indirect(mars_scenario(pointing_deg=45.0), seed=3)
    np.testing.assert_array_equal(a.states, b.states)
