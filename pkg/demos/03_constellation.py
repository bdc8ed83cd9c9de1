"""
Satellite task allocation
=========================

Satellites in a Walker constellation choose ground sites to observe. A site
is only worth something while it is within 60 degrees off-nadir, switching
targets costs 0.5, and observing drains the battery faster than idling
refills it. This script walks through the geometry and a greedy episode.
"""

import numpy as np

from reda.constellation import ConstellationEnv, episode_metrics
from reda.experiment import load_config, make_env
from reda.learners import GreedyPolicy
from reda.orbits import ConstellationGeometry, baseline_benefit

geom = ConstellationGeometry()
print(f"{geom.n_sats} satellites, period {geom.period_s / 60:.1f} min")

###############################################################################
# Benefit falls off as a Gaussian in the off-nadir angle and is zero beyond
# the field of view.

for theta in (0, 10, 20, 40, 59, 61):
    print(f"theta {theta:2d} deg -> benefit {baseline_benefit(theta, 1.0):.3f}")

###############################################################################
# The full problem: 324 satellites, 450 sites. Only a few sites are visible
# from any satellite at a time.

full = ConstellationEnv()
full.reset(0)
visible = (full.baseline() > 0).sum(axis=1)
print(f"visible sites per satellite: mean {visible.mean():.2f}, max {visible.max()}")
print("observation length", full.obs_dim, "local actions", full.n_actions)

###############################################################################
# The desk preset has 16 satellites and 25 sites. Greedy grabs every visible
# site, so batteries run flat.

env = make_env(load_config("configs/mini-constellation.cfg"))
env.reset(1)
trace = []
policy = GreedyPolicy()
while True:
    _, x = policy.act(env)
    step = env.step(x)
    trace.append(step)
    if step.terminal:
        break
print({k: round(v, 3) for k, v in episode_metrics(trace).items()})
print("final power levels", np.round(trace[-1].info["power"], 2))
