"""
A flat glide slope (altitude must stay nonnegative) with a 45 degree pointing cone.

Minimum thrust cannot hold the vehicle up here, so the trajectory may
touch the ground once during the first full-thrust arc and again at
touchdown, and nowhere else.
"""
from pdlanding import mars_scenario, solve_direct

scenario = mars_scenario(glide_slope_deg=0.0, pointing_deg=45.0)
p = scenario.params
print(f"min thrust / initial weight = {p.thrust_max * p.throttle_min / (scenario.initial_state.mass * p.gravity):.3f}")

traj, report, multipliers = solve_direct(scenario)
print("structure:", report.describe())
for c in report.contacts:
    where = "touchdown" if c.final else f"arc {c.arc_index} ({report.arcs[c.arc_index].kind})"
    print(f"  {c.kind} at t = {c.t_start:.2f} s on {where}, throttle {c.throttle:.3f}")

riding = traj.times[traj.pointing_slack <= 1e-6]
if riding.size:
    print(f"thrust rides the pointing cone from t = {riding.min():.1f} s to {riding.max():.1f} s")
print("largest glide-slope multiplier:", f"{multipliers.glide_slope.max():.3g}")
for name, v in report.verdicts.items():
    print(f"  {name:<28} {v.status}")
