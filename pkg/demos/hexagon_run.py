"""
Six agents converging to a hexagonal shape
==========================================

Integrate the gradient flow from a perturbed hexagon and check that the
error norm decays exponentially.
"""
from weakrigidity.dynamics import log_error_slope, monitor_centroid, simulate
from weakrigidity.scenarios import load_scenario

sc = load_scenario("sim1")
trace = simulate(sc.spec, sc.initial_positions(), sc.sim_config())
print("flag:", trace.flag, "after", round(trace.final_time, 2), "s")
print("final |e|:", trace.final_err_norm)

slope, r2 = log_error_slope(trace)
print(f"log|e| slope {slope:.4f}, R^2 {r2:.4f}")
print("centroid drift:", monitor_centroid(trace))

# Write the trace with ``weakrigidity simulate sim1 --out run`` and turn it
# into gnuplot input with ``weakrigidity plotdata run``.
