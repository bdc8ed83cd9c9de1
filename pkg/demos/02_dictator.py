"""
The dictator problem
====================

Three agents, three tasks, three states. Agent 0's task decides the next
state. Grabbing the best benefits now (greedy) moves the system into a
poor state; the best constant assignment earns less per step but keeps the
system in its rich state. REDA learns the difference.
"""

import dataclasses

import numpy as np

from reda.experiment import evaluate, load_config, run_experiment
from reda.learners import GreedyPolicy
from reda.sap import DictatorEnv, DictatorState

env = DictatorEnv()
for s in range(3):
    print(f"state {s} benefits\n{env.benefits(DictatorState(0, s))}")

###############################################################################
# Greedy is stuck at 37.8: it takes 9 once, then 3.2 per step in state 1.

print("greedy return:", evaluate(GreedyPolicy(), env, 1)["mean_return"])


class Fixed:
    allow_duplicates = False

    def act(self, env, eps=0.0, rng=None):
        x = np.array([0, 1, 2])
        return x, x


print("constant (0, 1, 2) return:", evaluate(Fixed(), env, 1)["mean_return"])

###############################################################################
# A shortened REDA run (the shipped preset trains for 50,000 steps).

cfg = load_config("configs/dictator.cfg")
cfg = dataclasses.replace(cfg, total_steps=8000, decay_steps=4000, final_eval_episodes=10)
rec = run_experiment(cfg, seed=0)
for row in rec.rows[::2]:
    print(f"step {row['step']:5d}  eps {row['epsilon']:.2f}  return {row['mean_return']:.1f}")
print("final REDA return:", rec.final["mean_return"])
