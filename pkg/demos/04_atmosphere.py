"""
Back-pressure reduces the usable thrust by a constant force.

The bang-bang structure survives and the mass costate becomes strictly
increasing, which is what rules out singular arcs in this model.
"""
import numpy as np

from pdlanding import mars_scenario, solve_indirect

for sigma in (0.0, 500.0, 2000.0):
    traj, report = solve_indirect(mars_scenario(pressure_term=sigma))
    rising = bool(np.all(np.diff(traj.costates[:, 6]) > 0.0))
    print(f"sigma = {sigma:6.0f} N  {report.describe():<48} cost {traj.cost_value:8.4f}"
          f"  p_m increasing: {rising}")
