"""Sequential assignment environments: shared step contract and the
three-agent "dictator" problem.

Environments are stateful (``reset`` / ``step``) but expose the pieces the
learners need as plain arrays:

* ``observations()`` -> ``(n_agents, obs_dim)``
* ``benefits()`` -> state-dependent benefit matrix ``(n_agents, n_tasks)``
* ``task_sets()`` -> ``(n_agents, k)`` global task index behind each local
  action; a trailing ``charge_action`` (if any) stands for every other task.

Agents, tasks and dictator states are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assignment import check_assignment

__all__ = ["CHARGE", "DICTATOR_BENEFITS", "DictatorEnv", "DictatorState", "StepResult", "split_counts"]

# placeholder task for "any task outside the local set" (out of view)
CHARGE = -1

DICTATOR_BENEFITS = np.array(
    [
        [[2.0, 3.0, 0.0], [0.0, 2.0, 3.0], [3.0, 0.0, 2.0]],
        [[0.0, 3.0, 0.0], [0.0, 0.0, 0.1], [0.1, 0.0, 0.0]],
        [[0.0, 0.0, 3.0], [0.1, 0.0, 0.0], [0.0, 0.1, 0.0]],
    ]
)


@dataclass
class StepResult:
    rewards: np.ndarray
    observations: np.ndarray
    terminal: bool
    next_state: object = None
    info: dict = field(default_factory=dict)


def split_counts(x) -> np.ndarray:
    """Number of agents sharing each agent's task (placeholders count 1)."""
    x = np.asarray(x)
    counts = np.ones(len(x))
    real = x >= 0
    if real.any():
        _, inverse, c = np.unique(x[real], return_inverse=True, return_counts=True)
        counts[real] = c[inverse]
    return counts


@dataclass(frozen=True)
class DictatorState:
    k: int  # steps already taken, 0..horizon
    s: int  # environment state in {0, 1, 2}


class DictatorEnv:
    """Agent 0's task becomes the next state; benefits depend on the state.

    Agents choosing the same task split its benefit equally. The best
    constant joint assignment is (0, 1, 2) (return 60 over 10 steps); the
    per-step greedy assignment (1, 2, 0) drives the system into state 1.
    """

    n_agents = 3
    n_tasks = 3
    n_actions = 3
    charge_action = None
    obs_dim = 6

    def __init__(self, horizon: int = 10, initial_state: int = 0):
        self.horizon = horizon
        self.initial_state = initial_state
        self.state = DictatorState(0, initial_state)

    def reset(self, seed=None) -> np.ndarray:
        # deterministic start; seed accepted for interface parity
        self.state = DictatorState(0, self.initial_state)
        return self.observations()

    def benefits(self, state: DictatorState | None = None) -> np.ndarray:
        state = self.state if state is None else state
        return DICTATOR_BENEFITS[state.s].copy()

    def observe(self, agent: int, state: DictatorState | None = None) -> np.ndarray:
        state = self.state if state is None else state
        obs = np.zeros(self.obs_dim)
        obs[state.s] = 1.0
        obs[3 + agent] = 1.0
        return obs

    def observations(self, state: DictatorState | None = None) -> np.ndarray:
        return np.stack([self.observe(i, state) for i in range(self.n_agents)])

    def task_sets(self) -> np.ndarray:
        return np.tile(np.arange(self.n_tasks), (self.n_agents, 1))

    def rewards(self, x, state: DictatorState | None = None) -> np.ndarray:
        x = np.asarray(x)
        beta = self.benefits(state)
        return beta[np.arange(self.n_agents), x] / split_counts(x)

    def transition(self, state: DictatorState, x) -> DictatorState:
        return DictatorState(state.k + 1, int(x[0]))

    def step(self, x, allow_duplicates: bool = True) -> StepResult:
        x = np.asarray(x, dtype=np.int64)
        if x.shape != (self.n_agents,):
            raise ValueError(f"expected {self.n_agents} task choices, got shape {x.shape}")
        if np.any(x < 0) or np.any(x >= self.n_tasks):
            raise ValueError(f"task index out of range [0, {self.n_tasks})")
        if not allow_duplicates:
            check_assignment(x, self.n_tasks)
        if self.state.k >= self.horizon:
            raise RuntimeError("episode already terminated; call reset()")
        rewards = self.rewards(x)
        self.state = self.transition(self.state, x)
        return StepResult(
            rewards=rewards,
            observations=self.observations(),
            terminal=self.state.k == self.horizon,
            next_state=self.state,
        )
