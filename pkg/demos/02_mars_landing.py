"""
Pinpoint landing from a lateral offset, solved two ways.

The shooting solver returns an extremal with costates; the transcription
solver starts from nothing and should land on the same trajectory.
"""
from pdlanding import mars_scenario, solve_direct, solve_indirect

scenario = mars_scenario()

extremal, ext_report = solve_indirect(scenario)
print("shooting      :", ext_report.describe(), f"cost {extremal.cost_value:.4f}")

collocated, col_report, _ = solve_direct(scenario)
print("transcription :", col_report.describe(), f"cost {collocated.cost_value:.4f}")

gap = max(abs(a - b) for a, b in zip(ext_report.switching_times, col_report.switching_times))
print(f"largest switching-time gap: {gap:.3f} s")

# seeding the transcription with the extremal needs only a couple of outer iterations
warm, _, _ = solve_direct(scenario, warm_start=extremal)
print("warm-started outer iterations:", warm.meta["outer_iterations"])
