import math

import numpy as np
import pytest

from pdlanding.integrate import FuelExhausted, Trajectory, propagate, rk4_step, simpson
from pdlanding.model import Control, hover_throttle, mars_scenario, vertical_scenario
from pdlanding.model import MARS_FLOW_RATE


def test_rk4_constant_fields():
    y = np.array([1.0, -2.0])
    np.testing.assert_array_equal(rk4_step(lambda t, y: np.zeros(2), y, 0.0, 0.3), y)
    np.testing.assert_allclose(rk4_step(lambda t, y: np.array([2.0, 1.0]), y, 0.0, 0.5), [2.0, -1.5])


def test_rk4_exponential_oracle():
    y1 = rk4_step(lambda t, y: -y, np.array([1.0]), 0.0, 0.1)[0]
    assert y1 == pytest.approx(0.9048375, abs=1e-7)
    assert abs(y1 - math.exp(-0.1)) < 1e-7


def test_rk4_is_fourth_order():
    def err(n):
        y, dt = np.array([1.0]), 1.0 / n
        for k in range(n):
            y = rk4_step(lambda t, y: -y, y, k * dt, dt)
        return abs(y[0] - math.exp(-1.0))
    ratios = [err(n) / err(2 * n) for n in (10, 20, 40)]
    assert all(14.0 < r < 18.0 for r in ratios)


def test_simpson_on_cubic_is_exact():
    t = np.linspace(0.0, 2.0, 11)
    assert simpson(t, t ** 3) == pytest.approx(4.0, rel=1e-14)


def test_hover_keeps_the_vehicle_still():
    sc = vertical_scenario(z0=100.0, vz0=0.0)
    a = hover_throttle(sc.initial_state.mass, sc.params)
    traj = propagate(sc, lambda t, s, p: Control([0, 0, 1], a), 20.0, 40)
    np.testing.assert_allclose(traj.states[:, 5], 0.0, atol=1e-12)
    np.testing.assert_allclose(traj.states[:, 2], 100.0, atol=1e-10)


def test_min_throttle_is_not_enough_to_hold_altitude():
    sc = vertical_scenario()
    p = sc.params
    assert p.thrust_max * p.throttle_min < sc.initial_state.mass * p.gravity
    traj = propagate(sc, lambda t, s, c: Control([0, 0, 1], p.throttle_min), 10.0, 50)
    assert np.all(np.diff(traj.states[:, 5]) < 0.0)


def test_terminal_error_drops_sixteenfold():
    # variable-mass vertical burn has a closed-form velocity (rocket equation)
    sc = vertical_scenario(flow_rate=MARS_FLOW_RATE)
    p, s0 = sc.params, sc.initial_state
    a, tf = 0.8, 30.0
    md = MARS_FLOW_RATE * a
    exact = s0.velocity[2] + p.thrust_max * a / md * math.log(s0.mass / (s0.mass - md * tf)) - p.gravity * tf
    policy = lambda t, s, c: Control([0, 0, 1], a)
    e1 = abs(propagate(sc, policy, tf, 10).states[-1, 5] - exact)
    e2 = abs(propagate(sc, policy, tf, 20).states[-1, 5] - exact)
    assert 12.0 < e1 / e2 < 20.0


def test_mass_bookkeeping_and_diagnostic_lengths():
    sc = mars_scenario(flow_rate=MARS_FLOW_RATE, glide_slope_deg=5.0, pointing_deg=45.0)
    policy = lambda t, s, c: Control([math.sin(0.3), 0, math.cos(0.3)], 0.3 + 0.5 * (t > 10.0))
    traj = propagate(sc, policy, 30.0, 300)
    m0 = sc.initial_state.mass
    assert abs(traj.states[-1, 6] - m0 + MARS_FLOW_RATE * traj.fuel_integral()) <= 1e-6 * m0
    for arr in (traj.h, traj.psi, traj.qr_dot_d, traj.pointing_slack):
        assert arr.shape == traj.times.shape
    assert np.all(np.isnan(traj.psi))


def test_fuel_exhaustion_is_reported():
    sc = vertical_scenario(flow_rate=MARS_FLOW_RATE)
    with pytest.raises(FuelExhausted):
        propagate(sc, lambda t, s, c: Control([0, 0, 1], 0.8), 100.0, 200)


def test_trajectory_rejects_bad_grids():
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0, 1.0, 1.0]), np.zeros((3, 7)), np.zeros((3, 3)), np.zeros(3))
    with pytest.raises(ValueError):
        Trajectory(np.array([0.5, 1.0]), np.zeros((2, 7)), np.zeros((2, 3)), np.zeros(2))
