"""Experiment configuration, training/evaluation driver and result files.

Configs are INI files with sections ``[run]``, ``[env]``, ``[learner]`` and
``[schedule]``; see ``configs/*.cfg``. Each run directory holds:

* ``config.cfg``  -- the full resolved config
* ``metrics.jsonl`` -- one record per evaluation point
* ``final.json``  -- final evaluation, config hash, wall clock
* ``checkpoint.npz`` -- learner parameters (learning algorithms only)
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import io
import json
import logging
import time
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .constellation import ConstellationConfig, ConstellationEnv, episode_metrics
from .learners import ExplorationSchedule, GreedyPolicy, IqlLearner, RandomPolicy, RedaConfig, RedaLearner
from .mlp import load_checkpoint, save_checkpoint
from .sap import DictatorEnv

log = logging.getLogger("reda")

__all__ = [
    "ExperimentConfig",
    "RunRecord",
    "aggregate",
    "evaluate",
    "export_plot_data",
    "load_config",
    "load_run",
    "make_env",
    "parse_config",
    "run_experiment",
]

ALGORITHMS = ("reda", "iql", "greedy", "random")
ENVIRONMENTS = ("dictator", "constellation")
METRICS = ("mean_return", "std_return", "epsilon", "loss", "conflict_rate", "power_out_fraction", "mean_assignment_duration")

# evaluation scenarios are shared by every run and algorithm
EVAL_SEED_BASE = 1_000_000

_RUN_KEYS = {
    "algorithm": str,
    "total_steps": int,
    "eval_interval": int,
    "eval_episodes": int,
    "final_eval_episodes": int,
    "seeds": str,
    "save_checkpoint": bool,
}
_SCHEDULE_KEYS = {"epsilon_start": float, "epsilon_end": float, "decay_steps": int}
_DICTATOR_KEYS = {"horizon": int, "initial_state": int}


@dataclass
class ExperimentConfig:
    env_name: str = "dictator"
    env_params: dict = field(default_factory=dict)
    algorithm: str = "reda"
    learner: RedaConfig = field(default_factory=RedaConfig)
    epsilon_start: float = 1.0
    epsilon_end: float = 0.0
    decay_steps: int = 10_000
    total_steps: int = 50_000
    eval_interval: int = 1_000
    eval_episodes: int = 10
    final_eval_episodes: int = 100
    seeds: tuple = (0,)
    save_checkpoint: bool = True

    def __post_init__(self):
        if self.env_name not in ENVIRONMENTS:
            raise ValueError(f"[env] name: unknown environment {self.env_name!r}")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"[run] algorithm: unknown algorithm {self.algorithm!r}")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("[run] seeds: seeds must be distinct")
        if self.eval_interval < 1 or self.total_steps < 0:
            raise ValueError("[run] eval_interval must be >= 1 and total_steps >= 0")

    @property
    def schedule(self) -> ExplorationSchedule:
        return ExplorationSchedule(self.epsilon_start, self.epsilon_end, self.decay_steps)

    def to_text(self) -> str:
        cp = configparser.ConfigParser()
        cp["run"] = {
            "algorithm": self.algorithm,
            "total_steps": str(self.total_steps),
            "eval_interval": str(self.eval_interval),
            "eval_episodes": str(self.eval_episodes),
            "final_eval_episodes": str(self.final_eval_episodes),
            "seeds": ",".join(str(s) for s in self.seeds),
            "save_checkpoint": str(self.save_checkpoint).lower(),
        }
        cp["env"] = {"name": self.env_name, **{k: _fmt(v) for k, v in sorted(self.env_params.items())}}
        cp["learner"] = {k: _fmt(v) for k, v in asdict(self.learner).items()}
        cp["schedule"] = {
            "epsilon_start": repr(self.epsilon_start),
            "epsilon_end": repr(self.epsilon_end),
            "decay_steps": str(self.decay_steps),
        }
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def content_hash(self) -> str:
        """Hash of everything but the seed list."""
        text = self.to_text().replace("seeds = " + ",".join(str(s) for s in self.seeds), "seeds = *")
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (tuple, list)):
        return ",".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return "none" if v is None else str(v)


def _convert(value: str, kind, key: str):
    try:
        if kind is bool:
            low = value.strip().lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(value)
            return low in ("true", "1", "yes")
        if kind == "optional_int":
            return None if value.strip().lower() in ("", "none") else int(value)
        if kind == "int_tuple":
            return tuple(int(v) for v in value.split(",") if v.strip())
        if kind == "float_tuple":
            return tuple(float(v) for v in value.split(",") if v.strip())
        return kind(value)
    except ValueError:
        raise ValueError(f"{key}: cannot parse {value!r}") from None


def _field_kinds(cls) -> dict:
    kinds = {}
    for f in fields(cls):
        default = f.default
        if f.name == "task_seed":
            kinds[f.name] = "optional_int"
        elif f.name == "hidden":
            kinds[f.name] = "int_tuple"
        elif isinstance(default, tuple):
            kinds[f.name] = "float_tuple"
        else:
            kinds[f.name] = type(default)
    return kinds


def parse_config(text: str) -> ExperimentConfig:
    """Parse INI text; unknown sections or keys raise naming the key."""
    cp = configparser.ConfigParser()
    cp.read_string(text)
    for section in cp.sections():
        if section not in ("run", "env", "learner", "schedule"):
            raise ValueError(f"[{section}]: unknown section")
    kw: dict = {}
    run = cp["run"] if cp.has_section("run") else {}
    for key, value in run.items():
        if key not in _RUN_KEYS:
            raise ValueError(f"[run] {key}: unknown key")
        kw[key] = _convert(value, "int_tuple" if key == "seeds" else _RUN_KEYS[key], f"[run] {key}")
    sched = cp["schedule"] if cp.has_section("schedule") else {}
    for key, value in sched.items():
        if key not in _SCHEDULE_KEYS:
            raise ValueError(f"[schedule] {key}: unknown key")
        kw[key] = _convert(value, _SCHEDULE_KEYS[key], f"[schedule] {key}")
    env = dict(cp["env"]) if cp.has_section("env") else {}
    name = env.pop("name", "dictator")
    allowed = _DICTATOR_KEYS if name == "dictator" else _field_kinds(ConstellationConfig)
    params = {}
    for key, value in env.items():
        if key not in allowed:
            raise ValueError(f"[env] {key}: unknown key for environment {name!r}")
        params[key] = _convert(value, allowed[key], f"[env] {key}")
    learner_kinds = _field_kinds(RedaConfig)
    learner = {}
    lsec = cp["learner"] if cp.has_section("learner") else {}
    horizon = params.get("horizon", 10 if name == "dictator" else ConstellationConfig.horizon)
    for key, value in lsec.items():
        if key in ("batch_episodes", "buffer_episodes"):
            # episode-counted sizes, converted with the horizon
            target = "batch_size" if key == "batch_episodes" else "buffer_capacity"
            learner[target] = _convert(value, int, f"[learner] {key}") * horizon
            continue
        if key not in learner_kinds:
            raise ValueError(f"[learner] {key}: unknown key")
        learner[key] = _convert(value, learner_kinds[key], f"[learner] {key}")
    return ExperimentConfig(env_name=name, env_params=params, learner=RedaConfig(**learner), **kw)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def make_env(cfg: ExperimentConfig):
    if cfg.env_name == "dictator":
        return DictatorEnv(**cfg.env_params)
    return ConstellationEnv(ConstellationConfig(**cfg.env_params))


def make_policy(cfg: ExperimentConfig, env, seed: int):
    if cfg.algorithm == "reda":
        return RedaLearner.for_env(env, cfg.learner, seed)
    if cfg.algorithm == "iql":
        return IqlLearner.for_env(env, cfg.learner, seed)
    if cfg.algorithm == "greedy":
        return GreedyPolicy()
    return RandomPolicy(seed)


# -- evaluation ---------------------------------------------------------------------


def run_episode(policy, env, seed, epsilon: float = 0.0, rng=None) -> dict:
    env.reset(seed)
    trace = []
    while True:
        _, x = policy.act(env, epsilon, rng)
        step = env.step(x, allow_duplicates=policy.allow_duplicates)
        if "in_view" not in step.info:
            counts = np.bincount(x[x >= 0], minlength=env.n_tasks)
            step.info.update(conflicted=counts[x] > 1, assignment=x, in_view=np.ones(len(x), bool), dead=np.zeros(len(x), bool))
        trace.append(step)
        if step.terminal:
            return episode_metrics(trace)


def evaluate(policy, env, episodes: int, seed: int = EVAL_SEED_BASE) -> dict:
    """Noise-free episodes on scenarios ``seed, seed + 1, ...``."""
    per_ep = [run_episode(policy, env, seed + e) for e in range(episodes)]
    returns = np.array([m["undiscounted_return"] for m in per_ep])
    out = {"mean_return": float(returns.mean()), "std_return": float(returns.std())}
    for key in ("conflict_rate", "power_out_fraction", "mean_assignment_duration"):
        out[key] = float(np.mean([m[key] for m in per_ep]))
    out["returns"] = returns.tolist()
    return out


# -- training -----------------------------------------------------------------------


@dataclass
class RunRecord:
    config_hash: str
    seed: int
    rows: list
    final: dict
    wall_clock: float
    checkpoint_path: str | None = None
    config_text: str = ""


def _episode_seed(seed: int, episode: int) -> int:
    return int(np.random.SeedSequence([seed, episode]).generate_state(1)[0])


def run_experiment(cfg: ExperimentConfig, seed: int | None = None, out_dir=None) -> RunRecord:
    """Train (if the algorithm learns) and evaluate one seed."""
    seed = cfg.seeds[0] if seed is None else seed
    start = time.perf_counter()
    env = make_env(cfg)
    eval_env = make_env(cfg)
    policy = make_policy(cfg, env, seed)
    learns = cfg.algorithm in ("reda", "iql")
    schedule = cfg.schedule
    rows: list = []
    losses: list = []

    def log_eval(step):
        eps = schedule(step) if learns else 0.0
        m = evaluate(policy, eval_env, cfg.eval_episodes)
        row = {
            "step": step,
            "mean_return": m["mean_return"],
            "std_return": m["std_return"],
            "epsilon": eps,
            "loss": float(np.mean(losses)) if losses else None,
            "conflict_rate": m["conflict_rate"],
            "power_out_fraction": m["power_out_fraction"],
            "mean_assignment_duration": m["mean_assignment_duration"],
        }
        losses.clear()
        rows.append(row)
        log.info("seed %d step %d return %.3f eps %.3f", seed, step, row["mean_return"], eps)

    log_eval(0)
    if learns:
        episode = 0
        obs = env.reset(_episode_seed(seed, episode))
        for t in range(1, cfg.total_steps + 1):
            eps = schedule(t - 1)
            a, x = policy.act(env, eps)
            res = env.step(x, allow_duplicates=policy.allow_duplicates)
            next_tasks = env.task_sets() if not res.terminal else np.zeros_like(env.task_sets())
            policy.store(obs, a, res.rewards, res.observations, res.terminal, next_tasks)
            if t % cfg.learner.train_every == 0:
                loss = policy.train_step()
                if loss is not None:
                    losses.append(loss)
            if res.terminal:
                episode += 1
                obs = env.reset(_episode_seed(seed, episode))
            else:
                obs = res.observations
            if t % cfg.eval_interval == 0:
                log_eval(t)
    else:
        for t in range(cfg.eval_interval, cfg.total_steps + 1, cfg.eval_interval):
            log_eval(t)

    final = evaluate(policy, eval_env, cfg.final_eval_episodes)
    ckpt = None
    record = RunRecord(cfg.content_hash(), seed, rows, final, time.perf_counter() - start, None, cfg.to_text())
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.cfg").write_text(cfg.to_text())
        with open(out / "metrics.jsonl", "w") as fh:
            for row in rows:
                fh.write(json.dumps(row) + "\n")
        if learns and cfg.save_checkpoint:
            ckpt = str(out / "checkpoint.npz")
            save_checkpoint(ckpt, policy.net, policy.target, policy.adam, cfg.total_steps,
                            extra={"config": cfg.to_text(), "seed": seed})
            record.checkpoint_path = ckpt
        (out / "final.json").write_text(
            json.dumps({"seed": seed, "config_hash": record.config_hash, "wall_clock": record.wall_clock,
                        "checkpoint": ckpt, "final": final}, indent=1)
        )
    return record


def load_run(run_dir) -> RunRecord:
    run_dir = Path(run_dir)
    cfg_text = (run_dir / "config.cfg").read_text()
    rows = [json.loads(line) for line in (run_dir / "metrics.jsonl").read_text().splitlines() if line]
    meta = json.loads((run_dir / "final.json").read_text())
    cfg = parse_config(cfg_text)
    if cfg.content_hash() != meta["config_hash"]:
        raise ValueError(f"{run_dir}: config hash does not match stored snapshot")
    return RunRecord(meta["config_hash"], meta["seed"], rows, meta["final"], meta["wall_clock"], meta["checkpoint"], cfg_text)


def evaluate_checkpoint(path, episodes: int) -> dict:
    online, target, adam, step, extra = load_checkpoint(path)
    cfg = parse_config(extra["config"])
    env = make_env(cfg)
    policy = make_policy(cfg, env, extra.get("seed", 0))
    policy.net, policy.target, policy.adam = online, target, adam
    return evaluate(policy, env, episodes)


# -- aggregation and figure data ---------------------------------------------------------


def aggregate(records: list[RunRecord]) -> dict:
    """Per-step mean and std across seeds for every metric."""
    if not records:
        raise ValueError("no run records")
    hashes = {r.config_hash for r in records}
    if len(hashes) > 1:
        raise ValueError("refusing to aggregate runs with different configs")
    grid = [row["step"] for row in records[0].rows]
    for r in records[1:]:
        if [row["step"] for row in r.rows] != grid:
            raise ValueError("evaluation step grids are misaligned")
    summary = {"config_hash": hashes.pop(), "n_runs": len(records), "step": grid}
    for key in METRICS:
        vals = np.array([[np.nan if row[key] is None else row[key] for row in r.rows] for r in records], dtype=float)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            summary[key] = {"mean": np.nanmean(vals, axis=0).tolist(), "std": np.nanstd(vals, axis=0).tolist()}
    finals = [r.final for r in records]
    summary["final"] = {
        key: {"mean": float(np.mean([f[key] for f in finals])), "std": float(np.std([f[key] for f in finals]))}
        for key in ("mean_return", "conflict_rate", "power_out_fraction", "mean_assignment_duration")
    }
    return summary


def write_summary_csv(summary: dict, path) -> None:
    """Columns: step, then <metric>_mean, <metric>_std for every metric."""
    header = ["step"] + [f"{k}_{s}" for k in METRICS for s in ("mean", "std")]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i, step in enumerate(summary["step"]):
            w.writerow([step] + [_cell(summary[k][s][i]) for k in METRICS for s in ("mean", "std")])


def _cell(v):
    return "" if v is None or (isinstance(v, float) and np.isnan(v)) else repr(float(v))


def export_plot_data(summaries: dict, out_dir) -> list[Path]:
    """One CSV per figure panel from ``{label: summary}``.

    * ``curve_<label>.csv``: step, mean_return, std_return (undiscounted
      return per episode)
    * ``bars.csv``: algorithm, power_out_fraction, conflict_rate,
      mean_assignment_duration (final evaluation means; fractions in [0, 1],
      duration in steps)
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for label, s in summaries.items():
        p = out / f"curve_{label}.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "mean_return", "std_return"])
            for i, step in enumerate(s.get("step", [])):
                w.writerow([step, _cell(s["mean_return"]["mean"][i]), _cell(s["mean_return"]["std"][i])])
        paths.append(p)
    p = out / "bars.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["algorithm", "power_out_fraction", "conflict_rate", "mean_assignment_duration"])
        for label, s in summaries.items():
            if "final" in s:
                f = s["final"]
                w.writerow([label] + [_cell(f[k]["mean"]) for k in ("power_out_fraction", "conflict_rate", "mean_assignment_duration")])
    paths.append(p)
    return paths
