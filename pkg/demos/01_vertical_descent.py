"""
Vertical descent with constant mass.

The fuel-optimal way to stop a falling lander is to coast on minimum thrust
and then brake at full thrust. The shooting solver recovers that profile
and the switching function changes sign exactly once.
"""
import numpy as np

from pdlanding import solve_indirect, vertical_scenario

scenario = vertical_scenario(z0=1500.0, vz0=-75.0)
traj, report = solve_indirect(scenario)

print("structure:", report.describe())
print(f"switch at t = {report.switching_times[0]:.4f} s, touchdown at t = {traj.t_f:.4f} s")
print(f"fuel integral = {traj.fuel_integral():.4f} s of full throttle")

psi = traj.psi
print("switching function at start / end:", f"{psi[0]:+.4f}", f"{psi[-1]:+.4f}")
print("shooting residual:", f"{traj.meta['residual']:.1e}")
