"""Experiment runner: config parsing, seed fan-out, CSV emission and
confidence-interval aggregation.

A config is a flat ``key = value`` text file (``#`` comments allowed);
unknown keys are errors.  Every (algorithm, seed) pair yields one run of
``T`` trials against the same pre-built environment instance; the context
and reward streams depend only on the seed, so runs of different
algorithms under one seed see identical trial sequences.  Results are
canonically ordered before writing, making the CSV byte-identical across
repetitions and worker counts.
"""
from __future__ import annotations

import json
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bases
from .baselines import Exp4, PerContextExp3
from .contextual import ContextualConfig, DirectAgent, FastBallAgent
from .core import ABSTAIN
from .environments import (LabeledGraph, RewardModel, draw_context,
                           draw_reward_vector, gen_gaussian_knn, gen_sbm,
                           load_edge_list)

CSV_HEADER = "trial,algorithm,basis,seed,action,reward,cum_reward,cum_mistakes,abstained"
ALGORITHMS = ("cba_direct", "cba_fast", "exp3", "exp4")
BASES = ("d1", "d2", "dinf", "lvc", "int")
METRIC_BASES = ("d1", "d2", "dinf")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    environment: str
    basis: str
    algorithms: list
    n_actions: int
    horizon: int
    m: int = 1
    seeds: list = field(default_factory=lambda: [0])
    env_seed: int = 0
    env_params: dict = field(default_factory=dict)
    reward: RewardModel = field(default_factory=RewardModel)
    out_dir: str | None = None

    def validate(self):
        if self.environment not in ("sbm", "gaussian", "file"):
            raise ConfigError(f"unknown environment {self.environment!r}")
        if self.basis not in BASES:
            raise ConfigError(f"unknown basis {self.basis!r}")
        if not self.algorithms:
            raise ConfigError("need at least one algorithm")
        for alg in self.algorithms:
            if alg not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {alg!r}")
        if "cba_fast" in self.algorithms and self.basis not in METRIC_BASES:
            raise ConfigError("cba_fast needs a metric ball basis (d1/d2/dinf)")
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if self.horizon < 0:
            raise ConfigError("T must be >= 0")
        if self.n_actions < 1 or self.m < 1:
            raise ConfigError("K and M must be >= 1")


_SCHEMA = {
    "environment": str,
    "basis": str,
    "algorithms": "list_str",
    "K": int,
    "T": int,
    "M": int,
    "seeds": "seeds",
    "env_seed": int,
    "out": str,
    "sbm.n_fg_classes": int,
    "sbm.clique_size": int,
    "sbm.background": int,
    "sbm.p_bg": float,
    "gaussian.n_fg_classes": int,
    "gaussian.fg_count": int,
    "gaussian.fg_sigma": float,
    "gaussian.bg_count": int,
    "gaussian.bg_sigma": float,
    "gaussian.k": int,
    "file.edges": str,
    "file.labels": str,
    "file.background_classes": "list_str",
    "file.noise_fraction": float,
    "reward.p_accept_match": float,
    "reward.p_accept_mismatch": float,
    "reward.reward_accept": float,
    "reward.reward_reject": float,
}


def _parse_seeds(value: str):
    seeds = []
    for part in value.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        elif part:
            seeds.append(int(part))
    return seeds


def parse_config(text: str) -> ExperimentConfig:
    """Parse the key=value config format, failing fast on unknown keys or
    bad values with line diagnostics."""
    values = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected 'key = value'")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"line {ln}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {ln}: duplicate key {key!r}")
        kind = _SCHEMA[key]
        try:
            if kind == "list_str":
                values[key] = [tok.strip() for tok in val.split(",") if tok.strip()]
            elif kind == "seeds":
                values[key] = _parse_seeds(val)
            else:
                values[key] = kind(val)
        except ValueError as exc:
            raise ConfigError(f"line {ln}: field {key!r}: {exc}") from exc

    for required in ("environment", "basis", "algorithms", "K", "T"):
        if required not in values:
            raise ConfigError(f"missing required key {required!r}")
    env = values["environment"]
    env_prefix = {"sbm": "sbm.", "gaussian": "gaussian.", "file": "file."}.get(env)
    if env_prefix is None:
        raise ConfigError(f"unknown environment {env!r}")
    env_params = {}
    for key, val in values.items():
        for prefix in ("sbm.", "gaussian.", "file."):
            if key.startswith(prefix):
                if prefix != env_prefix:
                    raise ConfigError(f"key {key!r} does not belong to "
                                      f"environment {env!r}")
                env_params[key[len(prefix):]] = val
    reward_kwargs = {key[len("reward."):]: val for key, val in values.items()
                     if key.startswith("reward.")}
    try:
        reward = RewardModel(**reward_kwargs)
    except ValueError as exc:
        raise ConfigError(f"reward model: {exc}") from exc
    config = ExperimentConfig(
        environment=env,
        basis=values["basis"],
        algorithms=values["algorithms"],
        n_actions=values["K"],
        horizon=values["T"],
        m=values.get("M", 1),
        seeds=values.get("seeds", [0]),
        env_seed=values.get("env_seed", 0),
        env_params=env_params,
        reward=reward,
        out_dir=values.get("out"),
    )
    config.validate()
    return config


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def build_environment(config: ExperimentConfig) -> LabeledGraph:
    rng = np.random.default_rng(np.random.SeedSequence(config.env_seed))
    p = config.env_params
    try:
        if config.environment == "sbm":
            return gen_sbm(p["n_fg_classes"], p["clique_size"], p["background"],
                           rng, p_bg=p.get("p_bg"))
        if config.environment == "gaussian":
            return gen_gaussian_knn(p["n_fg_classes"], p["fg_count"],
                                    p["fg_sigma"], p["bg_count"],
                                    p["bg_sigma"], p["k"], rng)
        return load_edge_list(p["edges"], p["labels"],
                              background_classes=p.get("background_classes", ()),
                              noise_fraction=p.get("noise_fraction", 0.0),
                              rng=rng)
    except KeyError as exc:
        raise ConfigError(f"environment {config.environment!r} is missing "
                          f"parameter {exc.args[0]!r}") from exc


def build_metric(config: ExperimentConfig, lg: LabeledGraph):
    g = lg.graph
    if config.basis == "dinf":
        return bases.shortest_path_metric(g)
    if config.basis == "d2":
        return bases.effective_resistance_metric(g)
    if config.basis == "d1":
        return bases.mincut_metric(g)
    return None


@dataclass
class Instance:
    """Pre-built environment shared by all runs of one experiment."""
    lg: LabeledGraph
    basis_kind: str
    orders: list | None = None
    basis: bases.Basis | None = None


def build_instance(config: ExperimentConfig) -> Instance:
    lg = build_environment(config)
    rng = np.random.default_rng(np.random.SeedSequence((config.env_seed, 1)))
    orders = basis = None
    metric = build_metric(config, lg)
    needs_basis = any(a in ("cba_direct", "exp4") for a in config.algorithms)
    if metric is not None:
        if "cba_fast" in config.algorithms:
            orders = bases.ball_orders(metric)
        if needs_basis:
            basis = bases.metric_ball_basis(metric)
    elif config.basis == "lvc":
        basis = bases.community_basis(lg.graph, rng)
    else:
        basis = bases.interval_basis(lg.graph)
    return Instance(lg=lg, basis_kind=config.basis, orders=orders, basis=basis)


@dataclass
class RunRecord:
    """Per-trial trace plus metadata of one (algorithm, seed) run."""
    algorithm: str
    basis: str
    seed: int
    actions: np.ndarray
    rewards: np.ndarray
    cum_reward: np.ndarray
    cum_mistakes: np.ndarray
    abstained: np.ndarray
    min_prob: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return self.actions.size


def make_learner(algorithm: str, config: ExperimentConfig, instance: Instance,
                 rng: np.random.Generator):
    k, t, m = config.n_actions, max(config.horizon, 1), config.m
    if algorithm == "cba_fast":
        cc = ContextualConfig(n_actions=k, horizon=t, m=m,
                              orders=instance.orders)
        return FastBallAgent(cc, rng)
    if algorithm == "cba_direct":
        cc = ContextualConfig(n_actions=k, horizon=t, m=m,
                              basis=instance.basis,
                              n_contexts=instance.lg.n_nodes)
        return DirectAgent(cc, rng)
    if algorithm == "exp3":
        return PerContextExp3(k, t, rng)
    if algorithm == "exp4":
        return Exp4(instance.basis, k, t, instance.lg.n_nodes, rng)
    raise ConfigError(f"unknown algorithm {algorithm!r}")


def run_single(algorithm: str, seed: int, config: ExperimentConfig,
               instance: Instance) -> RunRecord:
    """One full T-trial run.  Deterministic given (algorithm, seed)."""
    t0 = time.perf_counter()
    streams = np.random.SeedSequence(seed).spawn(3)
    ctx_rng, reward_rng, learner_rng = (np.random.default_rng(s) for s in streams)
    learner = make_learner(algorithm, config, instance, learner_rng)
    labels = instance.lg.labels
    n = instance.lg.n_nodes
    k, horizon = config.n_actions, config.horizon
    actions = np.zeros(horizon, dtype=np.int64)
    rewards = np.zeros(horizon)
    min_prob = np.ones(horizon)
    running_min = 1.0
    for t in range(horizon):
        x = draw_context(n, ctx_rng)
        r_vec = draw_reward_vector(config.reward, int(labels[x]), k, reward_rng)
        action = learner.step(x)
        r_obs = 0.0 if action == ABSTAIN else float(r_vec[action - 1])
        learner.feedback(r_obs)
        actions[t] = action
        rewards[t] = r_obs
        running_min = min(running_min, learner.last_action_prob)
        min_prob[t] = running_min
    abstained = actions == ABSTAIN
    mistakes = rewards < 0.0
    meta = {
        "algorithm": algorithm,
        "basis": instance.basis_kind,
        "seed": seed,
        "wall_clock_s": time.perf_counter() - t0,
        "min_selected_prob": float(running_min),
    }
    stats = getattr(learner, "projection_stats", None)
    if stats is not None:
        meta["bisection"] = stats.summary()
    if hasattr(learner, "n_projections"):
        meta["projections"] = learner.n_projections
    forest = getattr(learner, "forest", None)
    if forest is not None:
        meta["tree_rebuilds"] = forest.rebuilds
    return RunRecord(
        algorithm=algorithm, basis=instance.basis_kind, seed=seed,
        actions=actions, rewards=rewards,
        cum_reward=np.cumsum(rewards),
        cum_mistakes=np.cumsum(mistakes.astype(np.int64)),
        abstained=abstained, min_prob=min_prob, meta=meta)


def _run_task(args):
    algorithm, seed, config, instance = args
    return run_single(algorithm, seed, config, instance)


def run(config: ExperimentConfig, threads: int = 1, seed_offset: int = 0,
        out_dir=None) -> list:
    """Execute every (algorithm, seed) run and write results.csv plus
    meta.json into the output directory (if one is configured)."""
    config.validate()
    instance = build_instance(config)
    tasks = [(alg, seed + seed_offset, config, instance)
             for alg in sorted(config.algorithms)
             for seed in sorted(config.seeds)]
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(_run_task, tasks))
    else:
        records = [_run_task(task) for task in tasks]
    records.sort(key=lambda r: (r.algorithm, r.basis, r.seed))
    target = out_dir or config.out_dir
    if target is not None:
        target = Path(target)
        target.mkdir(parents=True, exist_ok=True)
        write_results_csv(target / "results.csv", records)
        (target / "meta.json").write_text(json.dumps(
            [r.meta for r in records], indent=2, sort_keys=True) + "\n")
    return records


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_results_csv(path, records):
    with open(path, "w", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        for rec in records:
            for t in range(rec.horizon):
                fh.write(",".join((
                    str(t + 1), rec.algorithm, rec.basis, str(rec.seed),
                    str(int(rec.actions[t])), _fmt(rec.rewards[t]),
                    _fmt(rec.cum_reward[t]), str(int(rec.cum_mistakes[t])),
                    str(int(rec.abstained[t])))) + "\n")


def read_results_csv(path) -> list:
    """Rebuild RunRecords (per-trial columns only) from a results CSV."""
    groups: dict[tuple, list] = {}
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        if header != CSV_HEADER:
            raise ConfigError(f"unexpected CSV header in {path}")
        for line in fh:
            parts = line.rstrip("\n").split(",")
            trial, alg, basis, seed = int(parts[0]), parts[1], parts[2], int(parts[3])
            groups.setdefault((alg, basis, seed), []).append(
                (trial, int(parts[4]), float(parts[5]), float(parts[6]),
                 int(parts[7]), int(parts[8])))
    records = []
    for (alg, basis, seed), rows in sorted(groups.items()):
        rows.sort()
        arr = np.asarray(rows, dtype=float)
        records.append(RunRecord(
            algorithm=alg, basis=basis, seed=seed,
            actions=arr[:, 1].astype(np.int64), rewards=arr[:, 2],
            cum_reward=arr[:, 3], cum_mistakes=arr[:, 4].astype(np.int64),
            abstained=arr[:, 5].astype(bool),
            min_prob=np.ones(arr.shape[0])))
    return records


@dataclass
class AggregateCurve:
    label: str
    trials: np.ndarray
    mean: np.ndarray
    halfwidth: np.ndarray | None


def aggregate(records, column: str = "cum_mistakes") -> list:
    """Per-algorithm mean curve with a 1.96 * standard-error half-width
    (omitted with a warning when only one seed is present)."""
    by_alg: dict[str, list] = {}
    for rec in records:
        by_alg.setdefault(rec.algorithm, []).append(getattr(rec, column))
    curves = []
    for alg in sorted(by_alg):
        stack = np.vstack([np.asarray(series, dtype=float)
                           for series in by_alg[alg]])
        mean = stack.mean(axis=0)
        if stack.shape[0] >= 2:
            se = stack.std(axis=0, ddof=1) / np.sqrt(stack.shape[0])
            half = 1.96 * se
        else:
            warnings.warn(f"{alg}: single seed, omitting confidence band",
                          stacklevel=2)
            half = None
        curves.append(AggregateCurve(
            label=alg, trials=np.arange(1, mean.size + 1),
            mean=mean, halfwidth=half))
    return curves
