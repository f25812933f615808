"""
Where do three agents end up?
=============================

Random planar starts reach the equilateral target; starts on a horizontal
line stay on it and stop at a saddle with a nonzero error.
"""
import numpy as np

from weakrigidity.equilibria import classify_equilibrium, monte_carlo_basin
from weakrigidity.scenarios import load_scenario

sc = load_scenario("sim3")
stats = monte_carlo_basin(sc.spec, 30, seed=0, simcfg=sc.sim_config())
print("generic starts:", stats.n_desired, "of", stats.trials, "converged;",
      "mean time", round(stats.mean_convergence_time, 1), "s")

sc4 = load_scenario("sim4")
line = monte_carlo_basin(sc4.spec, 10, seed=0, simcfg=sc4.sim_config(), collinear=True)
print("collinear starts:", line.n_incorrect, "of", line.trials, "stopped at incorrect equilibria")

rep = classify_equilibrium(sc4.spec, line.final_positions[0])
print("first end state:", np.round(line.final_positions[0], 3).tolist())
print("error norm", round(rep.err_norm, 4), "smallest Hessian eigenvalue", round(rep.min_eig, 4))
