"""
Linear assignment: exact, auction and brute force
=================================================

Every decision in this package is one linear assignment: n agents, m >= n
tasks, a benefit matrix, and each agent gets exactly one task with no task
shared. This script compares the three solvers on small problems.
"""

import time

import numpy as np

from reda.assignment import AuctionConfig, objective_value, solve_auction, solve_brute_force, solve_exact

###############################################################################
# A 3x3 example. Agent i is row i; the answer lists one task per agent.

beta = np.array([[2.0, 3.0, 0.0],
                 [0.0, 2.0, 3.0],
                 [3.0, 0.0, 2.0]])
x = solve_exact(beta)
print("assignment", x, "value", objective_value(beta, x))

###############################################################################
# Ties are broken toward the lexicographically smallest assignment, the same
# one brute force enumeration finds first.

ties = np.zeros((3, 5))
print("all-zero benefits ->", solve_exact(ties), solve_brute_force(ties))

###############################################################################
# The auction solver trades exactness for a decentralizable bidding process.
# Its answer is within n * epsilon of the optimum.

rng = np.random.default_rng(0)
gaps = []
for _ in range(200):
    b = rng.uniform(-10, 10, (5, 7))
    best = objective_value(b, solve_exact(b))
    gaps.append(best - objective_value(b, solve_auction(b, AuctionConfig(epsilon_bid=0.01))))
print(f"auction shortfall: max {max(gaps):.4f} (bound {5 * 0.01})")

###############################################################################
# Timing on a constellation-sized problem (16 satellites, 25 tasks).

b = rng.uniform(0, 5, (16, 25))
solve_exact(b)
t = time.perf_counter()
for _ in range(1000):
    solve_exact(b)
print(f"exact solver: {(time.perf_counter() - t) * 1e3:.1f} us per 16x25 solve")
