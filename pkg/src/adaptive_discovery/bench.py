"""Episode runner and the simulation experiment harness.

Seeding: run ``r`` draws its environment and pool from the stream
``(seed, r)``; policy ``p`` inside that run gets its own stream
``(seed, r, crc32(p))`` split into a selection stream and a label-noise
stream. All policies of a run therefore face the same parameters and pool,
and adding a policy never shifts another policy's randomness.
"""

from __future__ import annotations

import csv
import logging
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Sequence

import numpy as np
from scipy import stats

from . import graphtools
from .core import (CandidatePool, Glm, GraphEnv, Linear, LowRank, Step, Trajectory,
                   make_hard_instance, mean_vector, regret_ledger, RegretLedger)
from .engines import GibbsEngine, LaplaceEngine, LinearEngine, NodeEngine
from .errors import ConfigError, DiscoveryError, HorizonError, InvalidCombination, RunError
from .policies import Policy, PolicyConfig, RandomPolicy, make_policy

logger = logging.getLogger(__name__)

MODELS = ("linear", "logistic", "graph_random", "graph_complete", "graph_star", "matrix",
          "hard_instance")

_DEFAULT_T = {"linear": 100, "logistic": 100, "graph_random": 50, "graph_complete": 50,
              "graph_star": 50, "matrix": 100, "hard_instance": 20}


@dataclass
class ExperimentConfig:
    """Flat simulation settings. ``None`` means "pick the per-model default"."""

    model: str = "linear"
    d: int = 20
    n: int = 500
    n_nodes: int = 900
    m: int = 30
    r: int = 2
    T: int | None = None
    noise_sd: float = 1.0
    sigma_x: float = 1.0
    sigma_theta: float = 1.0
    sigma_0: float = 1.0
    graph_p: float = 0.01
    hub_fraction: float = 1 / 3
    bound_B: float = math.inf
    gap: float = 0.5
    policies: tuple = ()
    runs: int = 10
    seed: int = 0
    lam: float | None = None
    M: int = 100
    ucb_alpha: float = 1.0
    mode: str = "deterministic_vids"
    burn_in: int = 100
    thinning: int = 1
    workers: int = 1

    def resolved(self) -> ExperimentConfig:
        """Copy with defaults filled in and every constraint checked."""
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; choose from {', '.join(MODELS)}")
        cfg = replace(self)
        if cfg.T is None:
            cfg.T = _DEFAULT_T[cfg.model]
        if cfg.lam is None:
            cfg.lam = 3.0 if cfg.model == "matrix" else 2.0
        if not cfg.policies:
            cfg.policies = {"linear": ("ids", "ts", "ucb", "random"),
                            "logistic": ("ids", "ts", "ucb", "random"),
                            "hard_instance": ("random",)}.get(cfg.model, ("ids", "ts", "random"))
        cfg.policies = tuple(cfg.policies)
        if cfg.runs < 1:
            raise InvalidCombination("runs must be at least 1")
        if cfg.T < 0:
            raise InvalidCombination("T must be non-negative")
        if cfg.T > cfg.pool_size:
            raise InvalidCombination(f"T={cfg.T} exceeds the pool size n={cfg.pool_size}")
        if "ucb" in cfg.policies and cfg.model not in ("linear", "logistic"):
            raise InvalidCombination(f"UCB is not available for model {cfg.model!r}")
        if cfg.model == "hard_instance" and set(cfg.policies) - {"random", "oracle"}:
            raise InvalidCombination("hard_instance supports only the random and oracle policies")
        if cfg.burn_in < 0 or cfg.thinning < 1:
            raise InvalidCombination("burn_in must be >= 0 and thinning >= 1")
        if cfg.workers < 1:
            raise InvalidCombination("workers must be at least 1")
        _ = cfg.policy_config  # validates lambda, M and mode
        return cfg

    @property
    def pool_size(self) -> int:
        if self.model in ("linear", "logistic"):
            return self.n
        if self.model.startswith("graph"):
            return self.n_nodes
        if self.model == "matrix":
            return self.m * self.m
        T = self.T if self.T is not None else _DEFAULT_T["hard_instance"]
        return T * T

    @property
    def policy_config(self) -> PolicyConfig:
        lam = self.lam if self.lam is not None else (3.0 if self.model == "matrix" else 2.0)
        return PolicyConfig(lam=lam, M=self.M, ucb_alpha=self.ucb_alpha, mode=self.mode)


def config_fields() -> dict[str, type]:
    return {f.name: f.type for f in fields(ExperimentConfig)}


# --- instance construction ---------------------------------------------------


def build_instance(cfg: ExperimentConfig, rng):
    """Draw a fresh environment and pool; return ``(env, pool, engine_factory)``."""
    model = cfg.model
    if model in ("linear", "logistic"):
        X = rng.normal(0.0, cfg.sigma_x, (cfg.n, cfg.d))
        theta = rng.normal(0.0, cfg.sigma_theta, cfg.d)
        pool = CandidatePool.from_features(X)
        if model == "linear":
            env = Linear(theta, cfg.noise_sd)
            return env, pool, lambda: LinearEngine(X, cfg.sigma_theta, cfg.noise_sd)
        env = Glm(theta, "logistic", cfg.noise_sd)
        return env, pool, lambda: LaplaceEngine(X, cfg.sigma_theta)
    if model.startswith("graph"):
        N = cfg.n_nodes
        if model == "graph_random":
            graph = graphtools.gen_random(N, cfg.graph_p, rng)
        elif model == "graph_complete":
            graph = graphtools.gen_complete(N)
        else:
            graph = graphtools.gen_star(N, cfg.graph_p, cfg.hub_fraction, rng)
        values = rng.standard_normal(N)
        if math.isfinite(cfg.bound_B):
            values = np.clip(values, -cfg.bound_B, cfg.bound_B)
        env = GraphEnv(graph, values, cfg.noise_sd, cfg.bound_B)
        return env, CandidatePool.from_nodes(N), lambda: NodeEngine(graph, 1.0, cfg.noise_sd)
    if model == "matrix":
        U = rng.normal(0.0, cfg.sigma_0, (cfg.m, cfg.r))
        V = rng.normal(0.0, cfg.sigma_0, (cfg.m, cfg.r))
        env = LowRank(U, V, cfg.noise_sd)
        return env, CandidatePool.from_cells(cfg.m), lambda: GibbsEngine(
            cfg.m, cfg.m, cfg.r, cfg.sigma_0, cfg.noise_sd, cfg.burn_in, cfg.thinning)
    env, pool = make_hard_instance(cfg.T, cfg.gap)
    return env, pool, lambda: None


# --- episodes ----------------------------------------------------------------


def run_episode(env, pool: CandidatePool, policy: Policy, engine, T: int, rng,
                label_rng=None, keep_diagnostics: bool = False) -> tuple[Trajectory, RegretLedger]:
    """Label ``T`` items with ``policy`` and charge regret against the best ``T``.

    ``pool`` is not modified; the episode works on a copy. Label noise comes
    from ``label_rng`` (defaults to ``rng``).
    """
    if T > pool.n_active:
        raise HorizonError(f"horizon T={T} exceeds the {pool.n_active} active items")
    label_rng = rng if label_rng is None else label_rng
    policy.check(engine, pool)
    if engine is not None:
        engine.check(env, pool)
    true_means = mean_vector(env, pool)
    pool = pool.copy()
    traj = Trajectory()
    for t in range(1, T + 1):
        index, diag = policy.choose(engine, pool, rng)
        label, side = env.sample_label(pool.item(index), label_rng)
        if engine is not None:
            engine.observe(index, label, side)
        pool.deactivate(index)
        if diag is not None and not keep_diagnostics:
            diag = diag.summary()
        traj.steps.append(Step(t, index, label, side, diag))
    return traj, regret_ledger(true_means, traj.chosen, T)


def _policy_streams(seed: int, run: int, name: str):
    ss = np.random.SeedSequence([seed, run, zlib.crc32(name.encode())])
    sel, lab = ss.spawn(2)
    return np.random.default_rng(sel), np.random.default_rng(lab)


@dataclass
class RunRecord:
    run_id: int
    policy: str
    step: int
    chosen_index: int
    label: float
    instant_regret: float
    cumulative_regret: float


RAW_HEADER = [f.name for f in fields(RunRecord)]
SUMMARY_HEADER = ["policy", "step", "regret_mean", "regret_sd"]


def _run_one(cfg: ExperimentConfig, run: int) -> list[RunRecord]:
    env, pool, engine_factory = build_instance(cfg, np.random.default_rng([cfg.seed, run]))
    true_means = mean_vector(env, pool)
    records = []
    for name in cfg.policies:
        policy = make_policy(name, cfg.policy_config, true_means)
        rng, label_rng = _policy_streams(cfg.seed, run, name)
        engine = engine_factory() if policy.needs_engine else None
        try:
            traj, ledger = run_episode(env, pool, policy, engine, cfg.T, rng, label_rng)
        except DiscoveryError as exc:
            raise RunError(f"run {run}, policy {name}: {exc}") from exc
        for s, inst, cum in zip(traj.steps, ledger.instant, ledger.cumulative):
            records.append(RunRecord(run, name, s.t, s.chosen, s.label, float(inst), float(cum)))
        logger.info("run %d policy %s final regret %.4f", run, name, ledger.final)
    return records


@dataclass
class CurveSummary:
    """Cumulative regret curves: ``curves[p, run, step]`` and their mean / sd over runs."""

    policies: tuple
    curves: np.ndarray

    @property
    def steps(self) -> np.ndarray:
        return np.arange(1, self.curves.shape[2] + 1)

    @property
    def runs(self) -> int:
        return self.curves.shape[1]

    @property
    def mean(self) -> np.ndarray:
        return self.curves.mean(axis=1)

    @property
    def sd(self) -> np.ndarray:
        if self.runs == 1:
            return np.zeros(self.curves.shape[::2])
        return self.curves.std(axis=1, ddof=1)

    def final(self, policy: str) -> tuple[float, float]:
        p = self.policies.index(policy)
        return float(self.mean[p, -1]), float(self.sd[p, -1])

    def final_values(self, policy: str) -> np.ndarray:
        return self.curves[self.policies.index(policy), :, -1]

    def rows(self):
        for p, name in enumerate(self.policies):
            for t in range(self.curves.shape[2]):
                yield name, t + 1, float(self.mean[p, t]), float(self.sd[p, t])


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    summary: CurveSummary
    records: list[RunRecord] = field(repr=False)


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """One episode per (run, policy) on paired environment draws, then aggregate."""
    cfg = config.resolved()
    runs = range(cfg.runs)
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            per_run = list(ex.map(_run_one, [cfg] * cfg.runs, runs))
    else:
        per_run = [_run_one(cfg, r) for r in runs]
    records = [rec for batch in per_run for rec in batch]
    curves = np.zeros((len(cfg.policies), cfg.runs, cfg.T))
    for rec in records:
        curves[cfg.policies.index(rec.policy), rec.run_id, rec.step - 1] = rec.cumulative_regret
    return ExperimentResult(cfg, CurveSummary(cfg.policies, curves), records)


def write_raw_csv(records: Sequence[RunRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(RAW_HEADER)
        for rec in records:
            w.writerow([repr(v) if isinstance(v, float) else v for v in asdict(rec).values()])


def write_summary_csv(summary: CurveSummary, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_HEADER)
        for name, step, mean, sd in summary.rows():
            w.writerow([name, step, repr(mean), repr(sd)])


# --- diagnostics -------------------------------------------------------------


def hard_instance_demo(T_list: Sequence[int], runs: int = 10, seed: int = 0,
                       gap: float = 0.5) -> list[tuple[int, float]]:
    """Mean final regret of the random policy on the unstructured hard instance."""
    table = []
    for T in T_list:
        if T < 1:
            raise ValueError("every T must be at least 1")
        finals = []
        for run in range(runs):
            env, pool = make_hard_instance(T, gap)
            rng, label_rng = _policy_streams(seed, run, f"random/T={T}")
            _, ledger = run_episode(env, pool, RandomPolicy(), None, T, rng, label_rng)
            finals.append(ledger.final)
        table.append((int(T), float(np.mean(finals))))
    return table


def linear_fit(xs, ys) -> tuple[float, float, float]:
    """Least-squares ``(slope, intercept, r_squared)``."""
    res = stats.linregress(np.asarray(xs, float), np.asarray(ys, float))
    return float(res.slope), float(res.intercept), float(res.rvalue ** 2)


def exploratory_score(pool) -> float:
    """Smallest eigenvalue of the uniform-design second-moment matrix of the pool.

    This is a lower bound on the best achievable smallest eigenvalue over all
    design distributions on the pool.
    """
    X = pool.payloads if isinstance(pool, CandidatePool) else np.asarray(pool, dtype=float)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    second = X.T @ X / len(X)
    return float(max(np.linalg.eigvalsh(second)[0], 0.0))
