"""REDA and baseline learners for sequential assignment environments.

REDA learns per-agent action values with one shared network and picks joint
actions by solving an assignment problem over the matrix of those values.
With probability epsilon it follows the greedy guide (assignment on the
current benefit matrix); otherwise it perturbs the value matrix with
Gaussian noise scaled by its mean magnitude. Targets evaluate, with the
target network, the assignment the online network would pick next.

IQL shares buffer, network and target machinery but lets every agent argmax
its own values, so agents may collide on a task.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assignment import solve_exact, solve_exact_batch
from .mlp import MLP, Adam, soft_update
from .sap import CHARGE

__all__ = [
    "ExplorationSchedule",
    "GreedyPolicy",
    "IqlLearner",
    "RandomPolicy",
    "RedaConfig",
    "RedaLearner",
    "ReplayBuffer",
    "build_q_matrix",
    "global_actions",
    "iql_select",
    "local_actions",
    "mean_abs",
    "select_joint_action",
]


@dataclass(frozen=True)
class RedaConfig:
    gamma: float = 0.99
    learning_rate: float = 5e-4
    batch_size: int = 50
    buffer_capacity: int = 10_000
    tau: float = 0.01
    train_every: int = 1
    hard_update_every: int = 0
    hidden: tuple = (64, 64)
    noise_is_std: bool = True

    def __post_init__(self):
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must lie in [0, 1)")
        if not 0 < self.tau <= 1:
            raise ValueError("tau must lie in (0, 1]")
        if self.batch_size < 1 or self.buffer_capacity < self.batch_size:
            raise ValueError("need 1 <= batch_size <= buffer_capacity")


class ExplorationSchedule:
    """Linear decay from ``start`` to ``end`` over ``decay_steps``."""

    def __init__(self, start: float = 1.0, end: float = 0.0, decay_steps: int = 10_000):
        if decay_steps < 0:
            raise ValueError("decay_steps must be non-negative")
        self.start, self.end, self.decay_steps = start, end, decay_steps

    def __call__(self, t: int) -> float:
        if self.decay_steps == 0 or t >= self.decay_steps:
            return float(np.clip(self.end, 0.0, 1.0))
        eps = self.start + (self.end - self.start) * t / self.decay_steps
        return float(np.clip(eps, 0.0, 1.0))


class ReplayBuffer:
    """Fixed-capacity FIFO of joint transitions, stored as flat arrays."""

    def __init__(self, capacity: int, n_agents: int, obs_dim: int, k_tasks: int):
        self.capacity = capacity
        self.obs = np.zeros((capacity, n_agents, obs_dim))
        self.next_obs = np.zeros((capacity, n_agents, obs_dim))
        self.actions = np.zeros((capacity, n_agents), dtype=np.int64)
        self.rewards = np.zeros((capacity, n_agents))
        self.terminal = np.zeros(capacity, dtype=bool)
        self.next_tasks = np.zeros((capacity, n_agents, k_tasks), dtype=np.int64)
        self.size = 0
        self._next = 0

    def __len__(self) -> int:
        return self.size

    def add(self, obs, actions, rewards, next_obs, terminal, next_tasks) -> None:
        i = self._next
        self.obs[i] = obs
        self.actions[i] = actions
        self.rewards[i] = rewards
        self.next_obs[i] = next_obs
        self.terminal[i] = terminal
        self.next_tasks[i] = next_tasks
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def oldest_first(self) -> np.ndarray:
        """Storage slots ordered from oldest to newest."""
        if self.size < self.capacity:
            return np.arange(self.size)
        return (np.arange(self.capacity) + self._next) % self.capacity

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        return rng.choice(self.size, size=batch_size, replace=False)

    def batch(self, idx) -> dict:
        return {
            "obs": self.obs[idx],
            "actions": self.actions[idx],
            "rewards": self.rewards[idx],
            "next_obs": self.next_obs[idx],
            "terminal": self.terminal[idx],
            "next_tasks": self.next_tasks[idx],
        }


# -- local <-> global action maps ---------------------------------------------


def build_q_matrix(q_local: np.ndarray, task_sets: np.ndarray, n_tasks: int, charge_action) -> np.ndarray:
    """Expand ``(n, A)`` local values to an ``(n, n_tasks)`` matrix.

    Column ``task_sets[i, a]`` gets ``q_local[i, a]``; every other column of
    row i gets the charge value. Without a charge action the local actions
    already are the tasks.
    """
    if charge_action is None:
        if q_local.shape[1] != n_tasks:
            raise ValueError("local action count must equal task count without a charge action")
        return q_local.copy() if task_sets is None else _scatter(q_local, task_sets, n_tasks)
    if q_local.shape[1] != task_sets.shape[1] + 1:
        raise ValueError("q_local must have one column per local task plus the charge action")
    out = np.repeat(q_local[:, charge_action : charge_action + 1], n_tasks, axis=1)
    out[np.arange(len(q_local))[:, None], task_sets] = q_local[:, : task_sets.shape[1]]
    return out


def _scatter(q_local, task_sets, n_tasks):
    out = np.empty((len(q_local), n_tasks))
    out[np.arange(len(q_local))[:, None], task_sets] = q_local
    return out


def local_actions(x, task_sets: np.ndarray, charge_action) -> np.ndarray:
    """Global tasks -> local action indices; tasks outside a set -> charge."""
    x = np.asarray(x)
    hit = x[:, None] == task_sets
    found = hit.any(axis=1)
    if charge_action is None:
        if not found.all():
            raise ValueError("task outside the local set and no charge action")
        return hit.argmax(axis=1)
    return np.where(found, hit.argmax(axis=1), charge_action)


def global_actions(actions, task_sets: np.ndarray, charge_action) -> np.ndarray:
    """Local action indices -> executed global tasks (charge -> ``CHARGE``)."""
    actions = np.asarray(actions)
    rows = np.arange(len(actions))
    if charge_action is None:
        return task_sets[rows, actions]
    safe = np.minimum(actions, task_sets.shape[1] - 1)
    return np.where(actions == charge_action, CHARGE, task_sets[rows, safe])


def mean_abs(q_local: np.ndarray) -> float:
    return float(np.mean(np.abs(q_local)))


def select_joint_action(q_global, epsilon: float, benefits_now, rng: np.random.Generator, q_local=None, noise_is_std: bool = True):
    """Greedy guide with probability epsilon, else the perturbed assignment.

    Noise is drawn per entry of the global matrix with scale
    ``2 * mean|q_local| * epsilon`` (a standard deviation, or a variance when
    ``noise_is_std`` is false). At ``epsilon == 0`` no random numbers are
    consumed and the result is ``solve_exact(q_global)``.
    """
    if epsilon > 0 and rng.random() < epsilon:
        return solve_exact(benefits_now)
    if epsilon <= 0:
        return solve_exact(q_global)
    scale = 2.0 * mean_abs(q_global if q_local is None else q_local) * epsilon
    std = scale if noise_is_std else np.sqrt(scale)
    return solve_exact(q_global + rng.normal(0.0, std, size=np.shape(q_global)))


def iql_select(q_rows, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    """Independent epsilon-greedy argmax per agent (collisions allowed)."""
    q_rows = np.asarray(q_rows)
    n, A = q_rows.shape
    greedy = q_rows.argmax(axis=1)
    if epsilon <= 0:
        return greedy
    explore = rng.random(n) < epsilon
    return np.where(explore, rng.integers(0, A, size=n), greedy)


# -- policies -------------------------------------------------------------------


class GreedyPolicy:
    """Assignment on the current benefit matrix, ignoring the future."""

    allow_duplicates = False

    def act(self, env, epsilon: float = 0.0, rng=None):
        x = solve_exact(env.benefits())
        tasks = env.task_sets()
        a = local_actions(x, tasks, env.charge_action)
        return a, global_actions(a, tasks, env.charge_action)


class RandomPolicy:
    """Uniformly random valid joint assignment."""

    allow_duplicates = False

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)

    def act(self, env, epsilon: float = 0.0, rng=None):
        x = self.rng.permutation(env.n_tasks)[: env.n_agents]
        tasks = env.task_sets()
        a = local_actions(x, tasks, env.charge_action)
        return a, global_actions(a, tasks, env.charge_action)


class _QLearner:
    allow_duplicates = False

    def __init__(self, n_agents: int, n_tasks: int, n_actions: int, obs_dim: int, k_tasks: int, charge_action, cfg: RedaConfig, seed: int = 0):
        self.cfg = cfg
        self.n_agents, self.n_tasks, self.n_actions = n_agents, n_tasks, n_actions
        self.charge_action = charge_action
        seeds = np.random.SeedSequence(seed).spawn(3)
        self.net = MLP((obs_dim, *cfg.hidden, n_actions), np.random.default_rng(seeds[0]))
        self.target = self.net.copy()
        self.adam = Adam(self.net.params, lr=cfg.learning_rate)
        self.buffer = ReplayBuffer(cfg.buffer_capacity, n_agents, obs_dim, k_tasks)
        self.act_rng = np.random.default_rng(seeds[1])
        self.sample_rng = np.random.default_rng(seeds[2])
        self.updates = 0

    @classmethod
    def for_env(cls, env, cfg: RedaConfig, seed: int = 0):
        k = env.task_sets().shape[1]
        return cls(env.n_agents, env.n_tasks, env.n_actions, env.obs_dim, k, env.charge_action, cfg, seed)

    def q_values(self, obs) -> np.ndarray:
        return self.net.forward(obs)

    def store(self, obs, actions, rewards, next_obs, terminal, next_tasks) -> None:
        self.buffer.add(obs, actions, rewards, next_obs, terminal, next_tasks)

    def train_step(self):
        """One Adam step on a uniform minibatch; ``None`` while underfull."""
        cfg = self.cfg
        if len(self.buffer) < cfg.batch_size:
            return None
        batch = self.buffer.batch(self.buffer.sample_indices(cfg.batch_size, self.sample_rng))
        y = self.compute_targets(batch)
        loss, grads = self.net.loss_and_grad(batch["obs"], batch["actions"], y, batch_size=cfg.batch_size)
        self.adam.step(self.net.params, grads)
        self.updates += 1
        if cfg.hard_update_every:
            if self.updates % cfg.hard_update_every == 0:
                self.target = self.net.copy()
        else:
            soft_update(self.net, self.target, cfg.tau)
        return loss


class RedaLearner(_QLearner):
    def act(self, env, epsilon: float, rng=None):
        rng = self.act_rng if rng is None else rng
        tasks = env.task_sets()
        q_local = self.q_values(env.observations())
        q_global = build_q_matrix(q_local, tasks, self.n_tasks, self.charge_action)
        benefits = env.benefits() if epsilon > 0 else None
        x = select_joint_action(q_global, epsilon, benefits, rng, q_local=q_local, noise_is_std=self.cfg.noise_is_std)
        a = local_actions(x, tasks, self.charge_action)
        return a, global_actions(a, tasks, self.charge_action)

    def next_assignments(self, q_next_online, next_tasks) -> np.ndarray:
        """Local actions the assignment picks on each next-state value matrix.

        Batched form of :func:`build_q_matrix` followed by the exact solver.
        """
        B, n, A = q_next_online.shape
        K = next_tasks.shape[2]
        if self.charge_action is None:
            qg = np.empty((B, n, self.n_tasks))
            np.put_along_axis(qg, next_tasks, q_next_online, axis=2)
        else:
            qg = np.repeat(q_next_online[:, :, self.charge_action : self.charge_action + 1], self.n_tasks, axis=2)
            np.put_along_axis(qg, next_tasks, q_next_online[:, :, :K], axis=2)
        x = solve_exact_batch(qg)
        hit = x[..., None] == next_tasks
        if self.charge_action is None:
            return hit.argmax(axis=2)
        return np.where(hit.any(axis=2), hit.argmax(axis=2), self.charge_action)

    def compute_targets(self, batch) -> np.ndarray:
        r, term = batch["rewards"], batch["terminal"]
        y = r.copy()
        live = np.flatnonzero(~term)
        if live.size == 0 or self.cfg.gamma == 0:
            return y
        nobs = batch["next_obs"][live]
        a_next = self.next_assignments(self.net.forward(nobs), batch["next_tasks"][live])
        q_tgt = self.target.forward(nobs)
        picked = np.take_along_axis(q_tgt, a_next[..., None], axis=-1)[..., 0]
        y[live] += self.cfg.gamma * picked
        return y


class IqlLearner(_QLearner):
    allow_duplicates = True

    def act(self, env, epsilon: float, rng=None):
        rng = self.act_rng if rng is None else rng
        tasks = env.task_sets()
        if epsilon > 0 and rng.random() < epsilon:
            a = local_actions(solve_exact(env.benefits()), tasks, self.charge_action)
        else:
            a = iql_select(self.q_values(env.observations()), 0.0, rng)
        return a, global_actions(a, tasks, self.charge_action)

    def compute_targets(self, batch) -> np.ndarray:
        r, term = batch["rewards"], batch["terminal"]
        y = r.copy()
        live = np.flatnonzero(~term)
        if live.size == 0 or self.cfg.gamma == 0:
            return y
        y[live] += self.cfg.gamma * self.target.forward(batch["next_obs"][live]).max(axis=-1)
        return y
