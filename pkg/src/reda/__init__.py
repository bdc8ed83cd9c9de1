"""Learned value functions for sequential multi-agent assignment.

Submodules:

* ``assignment``  -- exact, auction and brute-force linear assignment
* ``sap``         -- environment interface and the three-agent dictator problem
* ``orbits``      -- Walker constellation geometry and viewing benefits
* ``constellation`` -- satellite task-allocation environment
* ``mlp``, ``tabular`` -- value function approximators
* ``learners``    -- REDA, independent Q-learning and fixed baselines
* ``experiment``  -- configs, training driver, aggregation, CSV output
"""

from .assignment import objective_value, solve_auction, solve_brute_force, solve_exact

__version__ = "0.1.0"

__all__ = ["objective_value", "solve_auction", "solve_brute_force", "solve_exact"]
