"""Satellite constellation sequential assignment environment.

Satellites are agents, ground sites are tasks. Each step every satellite
picks one task; benefits depend on viewing geometry, on whether the
satellite keeps its previous task (switching costs ``switch_penalty``) and
on its battery. Observations and actions are restricted to each satellite's
``top_k`` most valuable upcoming tasks plus one "charge" action standing for
every other (out of view) task.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .orbits import ConstellationGeometry, benefit_matrix, random_tasks
from .sap import CHARGE, StepResult, split_counts

__all__ = ["ConstellationConfig", "ConstellationEnv", "episode_metrics", "write_trace"]


@dataclass(frozen=True)
class ConstellationConfig:
    n_planes: int = 18
    sats_per_plane: int = 18
    altitude_km: float = 550.0
    inclination_deg: float = 58.0
    dt_seconds: float = 60.0
    n_tasks: int = 450
    horizon: int = 100
    sigma_deg: float = 20.0
    theta_fov_deg: float = 60.0
    max_lat_deg: float = 70.0
    top_k_tasks: int = 10
    n_neighbors: int = 10
    lookahead: int = 3
    switch_penalty: float = 0.5
    penalize_first_step: bool = True
    power_drain: float = 0.2
    power_charge: float = 0.1
    power_max: float = 1.0
    priority_pool: tuple = (1.0, 1.0, 1.0, 5.0)
    task_seed: int | None = None

    @property
    def geometry(self) -> ConstellationGeometry:
        return ConstellationGeometry(
            n_planes=self.n_planes,
            sats_per_plane=self.sats_per_plane,
            altitude_km=self.altitude_km,
            inclination_deg=self.inclination_deg,
            dt_seconds=self.dt_seconds,
        )


class ConstellationEnv:
    def __init__(self, config: ConstellationConfig | None = None, **overrides):
        cfg = config or ConstellationConfig()
        if overrides:
            cfg = ConstellationConfig(**{**asdict(cfg), **overrides})
        self.config = cfg
        self.geometry = cfg.geometry
        self.n_agents = self.geometry.n_sats
        self.n_tasks = cfg.n_tasks
        if self.n_agents > self.n_tasks:
            raise ValueError("constellation needs at least as many tasks as satellites")
        if cfg.top_k_tasks > self.n_tasks or cfg.n_neighbors >= self.n_agents:
            raise ValueError("top_k_tasks / n_neighbors too large for the problem size")
        self.horizon = cfg.horizon
        self.n_actions = cfg.top_k_tasks + 1
        self.charge_action = cfg.top_k_tasks
        group = 1 + cfg.n_neighbors
        self.obs_dim = group * cfg.top_k_tasks * cfg.lookahead + group + group * self.n_actions
        self.reset(0)

    # -- episode state -------------------------------------------------------

    def reset(self, seed=None) -> np.ndarray:
        cfg = self.config
        task_seed = cfg.task_seed if cfg.task_seed is not None else seed
        rng = np.random.default_rng(task_seed)
        self.task_lat, self.task_lon, self.task_priority = random_tasks(
            cfg.n_tasks, rng, cfg.max_lat_deg, cfg.priority_pool
        )
        steps = np.arange(self.horizon + cfg.lookahead - 1)
        self.baseline_all = benefit_matrix(
            self.geometry,
            self.task_lat,
            self.task_lon,
            self.task_priority,
            steps,
            cfg.sigma_deg,
            cfg.theta_fov_deg,
        )
        self.k = 0
        self.prev = np.full(self.n_agents, CHARGE, dtype=np.int64)
        self.power = np.full(self.n_agents, cfg.power_max)
        self.dead = np.zeros(self.n_agents, dtype=bool)
        self._refresh_sets()
        return self.observations()

    def baseline(self, offset: int = 0) -> np.ndarray:
        """Baseline benefits at step ``k + offset``."""
        return self.baseline_all[self.k + offset]

    def _lookahead_score(self) -> np.ndarray:
        L = self.config.lookahead
        return self.baseline_all[self.k : self.k + L].sum(axis=0)

    def _refresh_sets(self):
        cfg = self.config
        score = self._lookahead_score()
        # stable sort on -score: ties keep ascending task index
        self._tasks = np.argsort(-score, axis=1, kind="stable")[:, : cfg.top_k_tasks]
        # neighbor score: best lookahead benefit of each satellite on my top tasks
        nb = score[:, self._tasks].max(axis=2).T  # (me, other)
        np.fill_diagonal(nb, -np.inf)
        self._neighbors = np.argsort(-nb, axis=1, kind="stable")[:, : cfg.n_neighbors]

    def task_sets(self) -> np.ndarray:
        return self._tasks.copy()

    def neighbor_sets(self) -> np.ndarray:
        return self._neighbors.copy()

    # -- benefits ------------------------------------------------------------

    def benefits(self) -> np.ndarray:
        """State-dependent benefit matrix at the current step."""
        cfg = self.config
        base = self.baseline()
        alive = (self.power > 0) & ~self.dead
        out = np.where(base > 0, base - cfg.switch_penalty, 0.0)
        if not cfg.penalize_first_step and self.k == 0:
            out = base.copy()
        rows = np.flatnonzero(self.prev >= 0)
        out[rows, self.prev[rows]] = base[rows, self.prev[rows]]
        out[~alive] = 0.0
        return out

    def state_dependent_benefit(self, i: int, j: int) -> float:
        return float(self.benefits()[i, j])

    # -- observations and the local action interface --------------------------

    def observations(self) -> np.ndarray:
        cfg = self.config
        K, L = cfg.top_k_tasks, cfg.lookahead
        group = np.concatenate([np.arange(self.n_agents)[:, None], self._neighbors], axis=1)
        window = self.baseline_all[self.k : self.k + L]  # (L, n, m)
        ben = window[:, group[:, :, None], self._tasks[:, None, :]]  # (L, n, G, K)
        ben = np.moveaxis(ben, 0, -1).reshape(self.n_agents, -1)
        power = self.power[group]
        prev_local = self._localize(self.prev[group], self._tasks[:, None, :])
        onehot = np.zeros(group.shape + (self.n_actions,))
        np.put_along_axis(onehot, prev_local[..., None], 1.0, axis=-1)
        return np.concatenate([ben, power, onehot.reshape(self.n_agents, -1)], axis=1)

    def _localize(self, tasks, task_sets):
        hit = tasks[..., None] == task_sets
        return np.where(hit.any(-1), hit.argmax(-1), self.charge_action)

    def local_to_global(self, i: int, a: int) -> int:
        if not 0 <= a < self.n_actions:
            raise ValueError(f"local action {a} outside [0, {self.n_actions})")
        return CHARGE if a == self.charge_action else int(self._tasks[i, a])

    def global_to_local(self, x) -> np.ndarray:
        return self._localize(np.asarray(x), self._tasks)

    # -- dynamics ------------------------------------------------------------

    def step(self, x, allow_duplicates: bool = False) -> StepResult:
        cfg = self.config
        x = np.asarray(x, dtype=np.int64)
        if x.shape != (self.n_agents,):
            raise ValueError(f"expected {self.n_agents} task choices, got shape {x.shape}")
        if np.any((x < 0) & (x != CHARGE)) or np.any(x >= self.n_tasks):
            raise ValueError("task index out of range")
        real = x[x >= 0]
        if not allow_duplicates and len(np.unique(real)) != len(real):
            raise ValueError("duplicate task assignment")
        if self.k >= self.horizon:
            raise RuntimeError("episode already terminated; call reset()")

        rows = np.arange(self.n_agents)
        beta_hat = self.benefits()
        base = self.baseline()
        xs = np.where(x >= 0, x, 0)
        counts = split_counts(x)
        rewards = np.where(x >= 0, beta_hat[rows, xs], 0.0)
        if allow_duplicates:
            rewards = rewards / counts
        in_view = (x >= 0) & (base[rows, xs] > 0)
        conflicted = in_view & (counts > 1)

        live = ~self.dead
        drained = np.where(in_view, self.power - cfg.power_drain, np.minimum(cfg.power_max, self.power + cfg.power_charge))
        self.power = np.where(live, np.round(drained, 12), self.power)
        self.dead |= self.power <= 0

        self.prev = x.copy()
        self.k += 1
        terminal = self.k == self.horizon
        if not terminal:
            self._refresh_sets()
        info = {
            "assignment": x.copy(),
            "in_view": in_view,
            "conflicted": conflicted,
            "power": self.power.copy(),
            "dead": self.dead.copy(),
        }
        return StepResult(
            rewards=rewards,
            observations=self.observations() if not terminal else np.zeros((self.n_agents, self.obs_dim)),
            terminal=terminal,
            next_state=self.k,
            info=info,
        )


def episode_metrics(trace: list[StepResult]) -> dict:
    """Summary statistics of one finished constellation episode."""
    if not trace:
        raise ValueError("empty trace")
    total = float(sum(step.rewards.sum() for step in trace))
    conflict = float(np.mean([step.info["conflicted"].mean() for step in trace]))
    power_out = float(trace[-1].info["dead"].mean())
    # run lengths of an unchanged in-view task, per agent
    assignments = np.stack([np.where(s.info["in_view"], s.info["assignment"], CHARGE) for s in trace])
    runs = []
    for col in assignments.T:
        length = 0
        for t, task in enumerate(col):
            if task >= 0 and t > 0 and col[t - 1] == task:
                length += 1
            else:
                if length:
                    runs.append(length)
                length = 1 if task >= 0 else 0
        if length:
            runs.append(length)
    duration = float(np.mean(runs)) if runs else 0.0
    return {
        "undiscounted_return": total,
        "power_out_fraction": power_out,
        "conflict_rate": conflict,
        "mean_assignment_duration": duration,
    }


def write_trace(trace: list[StepResult], path) -> None:
    """One JSON object per step: k, assignments, rewards, powers."""
    with open(path, "w") as fh:
        for k, step in enumerate(trace):
            fh.write(
                json.dumps(
                    {
                        "k": k,
                        "assignments": step.info["assignment"].tolist(),
                        "rewards": step.rewards.tolist(),
                        "powers": step.info["power"].tolist(),
                    }
                )
                + "\n"
            )
