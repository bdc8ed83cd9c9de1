"""Exact tabular evaluation of fixed joint policies on the dictator problem.

A joint policy is an integer array ``policy[s] -> joint assignment`` of shape
``(n_states, n_agents)``. Per-agent tables have shape
``(n_agents, n_states, n_tasks)`` and hold ``Q_i(s, j)``: agent ``i`` takes
``j`` now (everyone else follows the policy), then all follow the policy.
"""

from __future__ import annotations

import numpy as np

from .sap import DictatorEnv, DictatorState

__all__ = [
    "deviation_outcomes",
    "fixed_point",
    "joint_return",
    "per_agent_q_finite",
    "tabular_backup",
]


def deviation_outcomes(env: DictatorEnv, policy):
    """Immediate reward and next state when agent i deviates to task j.

    Returns ``(reward, next_state)``, both ``(n_agents, n_states, n_tasks)``.
    """
    policy = np.asarray(policy)
    n, S, m = env.n_agents, len(policy), env.n_tasks
    reward = np.zeros((n, S, m))
    nxt = np.zeros((n, S, m), dtype=np.int64)
    for s in range(S):
        state = DictatorState(0, s)
        for i in range(n):
            for j in range(m):
                x = policy[s].copy()
                x[i] = j
                reward[i, s, j] = env.rewards(x, state)[i]
                nxt[i, s, j] = env.transition(state, x).s
    return reward, nxt


def tabular_backup(table, policy, env: DictatorEnv, gamma: float, outcomes=None) -> np.ndarray:
    """One application of the fixed-policy backup (infinite horizon):

    ``(F Q)_i(s, j) = r_i(s, j) + gamma * Q_i(s', policy[s'][i])``.

    Pass ``outcomes = deviation_outcomes(env, policy)`` when iterating to
    avoid re-enumerating the environment every call. Floating tables keep
    their dtype, so ``np.longdouble`` input iterates in extended precision.
    """
    table = np.asarray(table)
    if not np.issubdtype(table.dtype, np.floating):
        table = table.astype(np.float64)
    policy = np.asarray(policy)
    reward, nxt = deviation_outcomes(env, policy) if outcomes is None else outcomes
    agents = np.arange(env.n_agents)[:, None, None]
    follow = policy[nxt, agents]  # agent i's next task under the policy
    return reward + gamma * table[agents, nxt, follow]


def fixed_point(policy, env: DictatorEnv, gamma: float) -> np.ndarray:
    """Fixed point of :func:`tabular_backup` by a direct linear solve."""
    policy = np.asarray(policy)
    S = len(policy)
    reward, nxt = deviation_outcomes(env, policy)
    out = np.empty_like(reward)
    for i in range(env.n_agents):
        # on-policy values V_i(s) = Q_i(s, policy[s][i])
        P = np.zeros((S, S))
        r = np.empty(S)
        for s in range(S):
            a = policy[s][i]
            r[s] = reward[i, s, a]
            P[s, nxt[i, s, a]] = 1.0
        V = np.linalg.solve(np.eye(S) - gamma * P, r)
        out[i] = reward[i] + gamma * V[nxt[i]]
    return out


def per_agent_q_finite(policy, env: DictatorEnv, gamma: float) -> np.ndarray:
    """Finite-horizon per-agent values by backward induction.

    Returns ``(horizon, n_agents, n_states, n_tasks)`` indexed by steps
    already taken ``k``.
    """
    policy = np.asarray(policy)
    reward, nxt = deviation_outcomes(env, policy)
    agents = np.arange(env.n_agents)[:, None, None]
    follow = policy[nxt, agents]
    T = env.horizon
    q = np.zeros((T,) + reward.shape)
    q[T - 1] = reward
    for k in range(T - 2, -1, -1):
        q[k] = reward + gamma * q[k + 1][agents, nxt, follow]
    return q


def joint_return(policy, env: DictatorEnv, s: int, k: int, gamma: float, first=None) -> float:
    """Discounted joint return of a rollout from ``(k, s)``: play ``first``
    (default ``policy[s]``) then follow the policy until the horizon."""
    policy = np.asarray(policy)
    state = DictatorState(k, s)
    x = policy[s] if first is None else np.asarray(first)
    total, discount = 0.0, 1.0
    while True:
        total += discount * float(np.sum(env.rewards(x, state)))
        state = env.transition(state, x)
        if state.k >= env.horizon:
            return total
        discount *= gamma
        x = policy[state.s]
