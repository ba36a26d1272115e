"""Evaluation on recorded datasets.

A dataset is a descriptor table plus one yield column per target. Each run
replays the recorded yields as noiseless labels while the policy models them
with Bayesian linear regression on the (standardized) descriptors.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from importlib import resources
from typing import Sequence

import numpy as np

from .bench import _policy_streams, run_episode
from .core import CandidatePool, Replay
from .engines import LinearEngine
from .errors import DatasetError, HorizonError, InvalidCombination
from .policies import PolicyConfig, make_policy

logger = logging.getLogger(__name__)

__all__ = [
    "ReplayDataset",
    "load_dataset",
    "load_synthetic",
    "make_synthetic_dataset",
    "write_dataset",
    "horizon",
    "ReplaySummary",
    "replay_run",
    "TableRow",
    "format_cell",
    "summarize_table",
    "format_table_text",
    "write_table_csv",
    "ReplayConfig",
    "run_replay_study",
]


@dataclass
class ReplayDataset:
    names: list[str]
    feature_names: list[str]
    features: np.ndarray
    targets: dict[str, np.ndarray]

    @property
    def n(self) -> int:
        return len(self.names)

    @property
    def d(self) -> int:
        return self.features.shape[1]


def _read_table(path) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, newline="", encoding="utf-8-sig") as fh:
            rows = [r for r in csv.reader(fh) if any(c.strip() for c in r)]
    except FileNotFoundError:
        raise DatasetError(f"{path}: file not found") from None
    if not rows:
        raise DatasetError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    if len(header) < 2:
        raise DatasetError(f"{path}: need an id column and at least one data column")
    for lineno, row in enumerate(rows[1:], 2):
        if len(row) != len(header):
            raise DatasetError(f"{path}: row {lineno} has {len(row)} cells, header has {len(header)}")
    return header, [[c.strip() for c in r] for r in rows[1:]]


def _number(cell: str, path, row_id: str, column: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise DatasetError(f"{path}: row {row_id!r}, column {column!r}: non-numeric cell {cell!r}") from None
    if not math.isfinite(value):
        raise DatasetError(f"{path}: row {row_id!r}, column {column!r}: non-finite value")
    return value


def load_dataset(features_path, yields_path) -> ReplayDataset:
    """Load ``id,f1,...,fd`` descriptors and ``id,<target>...`` yields.

    Yield columns holding any value above 1 are read as percentages and
    divided by 100. A target with missing cells is dropped with a warning.
    """
    f_header, f_rows = _read_table(features_path)
    y_header, y_rows = _read_table(yields_path)
    names = [r[0] for r in f_rows]
    if len(set(names)) != len(names):
        raise DatasetError(f"{features_path}: duplicate row ids")
    y_names = [r[0] for r in y_rows]
    if y_names != names:
        missing = sorted(set(names) ^ set(y_names))
        where = f"ids {missing[:5]}" if missing else "row order"
        raise DatasetError(f"{yields_path}: rows misaligned with {features_path} ({where})")
    X = np.array([[_number(c, features_path, r[0], col) for c, col in zip(r[1:], f_header[1:])]
                  for r in f_rows])

    targets = {}
    for j, target in enumerate(y_header[1:], 1):
        cells = [r[j] for r in y_rows]
        if any(c == "" for c in cells):
            if all(c == "" for c in cells):
                raise DatasetError(f"{yields_path}: target column {target!r} is empty")
            logger.warning("dropping target %s: missing yields", target)
            continue
        y = np.array([_number(c, yields_path, r[0], target) for c, r in zip(cells, y_rows)])
        if np.any(y > 1):
            y = y / 100.0
        if np.any(y < 0) or np.any(y > 1):
            raise DatasetError(f"{yields_path}: target {target!r} has yields outside [0, 100]%")
        targets[target] = y
    if not targets:
        raise DatasetError(f"{yields_path}: no usable target columns")
    return ReplayDataset(names, f_header[1:], X, targets)


def write_dataset(dataset: ReplayDataset, features_path, yields_path, percent: bool = False) -> None:
    with open(features_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", *dataset.feature_names])
        for name, row in zip(dataset.names, dataset.features):
            w.writerow([name, *(repr(float(v)) for v in row)])
    scale = 100.0 if percent else 1.0
    with open(yields_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", *dataset.targets])
        for i, name in enumerate(dataset.names):
            w.writerow([name, *(repr(round(float(y[i]) * scale, 10)) for y in dataset.targets.values())])


def make_synthetic_dataset(n: int = 80, d: int = 10, n_targets: int = 3, seed: int = 2024) -> ReplayDataset:
    """Descriptor table with yields from a noisy logistic response per target."""
    rng = np.random.default_rng(seed)
    X = np.round(rng.normal(size=(n, d)), 4)
    targets = {}
    for k in range(n_targets):
        w = rng.normal(scale=0.8, size=d)
        z = X @ w - 1.5 + rng.normal(scale=0.5, size=n)
        targets[f"Y{k + 1}"] = np.round(1 / (1 + np.exp(-z)), 4)
    return ReplayDataset([f"c{i:03d}" for i in range(n)], [f"f{j + 1}" for j in range(d)], X, targets)


def load_synthetic() -> ReplayDataset:
    """The bundled 80 x 10 synthetic dataset (yields stored as percentages)."""
    base = resources.files("adaptive_discovery") / "data"
    with resources.as_file(base / "synthetic_features.csv") as f, \
            resources.as_file(base / "synthetic_yields.csv") as y:
        return load_dataset(f, y)


def horizon(n: int, fraction: float = 0.2) -> int:
    """``fraction * n`` rounded half up."""
    return int(math.floor(fraction * n + 0.5))


def _design(X: np.ndarray) -> np.ndarray:
    sd = X.std(axis=0)
    Z = (X - X.mean(axis=0)) / np.where(sd > 0, sd, 1.0)
    return np.column_stack([np.ones(len(X)), Z])


@dataclass
class ReplaySummary:
    target: str
    policy: str
    T: int
    mean: float
    sd: float | None
    finals: np.ndarray


def replay_run(dataset: ReplayDataset, target: str, policy: str, runs: int = 10,
               horizon_fraction: float = 0.2, T: int | None = None, noise_sd: float = 0.1,
               prior_sd: float = 1.0, config: PolicyConfig = PolicyConfig(),
               seed: int = 0) -> ReplaySummary:
    """Cumulative regret at the horizon, mean and sd over ``runs`` replays.

    Deterministic policies are run once and report ``sd=None``.
    """
    if target not in dataset.targets:
        raise InvalidCombination(f"unknown target {target!r}")
    if runs < 1:
        raise InvalidCombination("runs must be at least 1")
    T = horizon(dataset.n, horizon_fraction) if T is None else T
    if T < 1:
        raise HorizonError("horizon must be at least 1")
    if T > dataset.n:
        raise HorizonError(f"horizon T={T} exceeds n={dataset.n}")
    yields = dataset.targets[target]
    env = Replay(yields)
    X = _design(dataset.features)
    pool = CandidatePool.from_features(X)
    probe = make_policy(policy, config, yields)
    n_runs = runs if probe.randomized else 1
    finals = []
    for run in range(n_runs):
        pol = make_policy(policy, config, yields)
        engine = LinearEngine(X, prior_sd, noise_sd) if pol.needs_engine else None
        rng, label_rng = _policy_streams(seed, run, f"{target}/{policy}")
        _, ledger = run_episode(env, pool, pol, engine, T, rng, label_rng)
        finals.append(ledger.final)
    finals = np.array(finals)
    if not probe.randomized:
        sd = None
    else:
        sd = float(finals.std(ddof=1)) if n_runs > 1 else 0.0
    return ReplaySummary(target, policy, T, float(finals.mean()), sd, finals)


@dataclass
class TableRow:
    target: str
    policy: str
    regret_mean: float
    regret_sd: float | None
    is_best: bool

    @property
    def cell(self) -> str:
        return format_cell(self.regret_mean, self.regret_sd)


def format_cell(mean: float, sd: float | None) -> str:
    return f"{mean:.2f} ({'-' if sd is None else f'{sd:.2f}'})"


def summarize_table(results: Sequence[ReplaySummary]) -> list[TableRow]:
    """Flag the lowest mean regret per target; ties go to the first listed policy."""
    best: dict[str, ReplaySummary] = {}
    for r in results:
        if r.target not in best or r.mean < best[r.target].mean:
            best[r.target] = r
    return [TableRow(r.target, r.policy, r.mean, r.sd, best[r.target] is r) for r in results]


def format_table_text(rows: Sequence[TableRow]) -> str:
    """Aligned text: one column per target, one line per policy, best cells starred."""
    targets = list(dict.fromkeys(r.target for r in rows))
    policies = list(dict.fromkeys(r.policy for r in rows))
    cells = {(r.target, r.policy): r.cell + ("*" if r.is_best else "") for r in rows}
    table = [["policy", *targets]] + [[p, *(cells.get((t, p), "") for t in targets)] for p in policies]
    widths = [max(len(row[c]) for row in table) for c in range(len(table[0]))]
    return "\n".join("  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() for row in table)


def write_table_csv(rows: Sequence[TableRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["target", "policy", "regret_mean", "regret_sd", "is_best"])
        for r in rows:
            w.writerow([r.target, r.policy, repr(r.regret_mean),
                        "" if r.regret_sd is None else repr(r.regret_sd), int(r.is_best)])


@dataclass
class ReplayConfig:
    """Flat settings for a replay study. ``dataset = synthetic`` uses the bundled data."""

    dataset: str = "synthetic"
    features: str = ""
    yields: str = ""
    targets: tuple = ()
    policies: tuple = ("random", "ids", "ts", "ucb")
    runs: int = 10
    horizon_fraction: float = 0.2
    T: int | None = None
    noise_sd: float = 0.1
    prior_sd: float = 1.0
    lam: float = 2.0
    M: int = 100
    ucb_alpha: float = 1.0
    mode: str = "deterministic_vids"
    seed: int = 0

    @property
    def policy_config(self) -> PolicyConfig:
        return PolicyConfig(lam=self.lam, M=self.M, ucb_alpha=self.ucb_alpha, mode=self.mode)

    def load(self) -> ReplayDataset:
        if self.dataset == "synthetic":
            return load_synthetic()
        if self.dataset != "files":
            raise InvalidCombination("dataset must be 'synthetic' or 'files'")
        if not (self.features and self.yields):
            raise InvalidCombination("dataset = files needs both features and yields paths")
        return load_dataset(self.features, self.yields)


def run_replay_study(cfg: ReplayConfig, dataset: ReplayDataset | None = None) -> list[ReplaySummary]:
    dataset = cfg.load() if dataset is None else dataset
    targets = list(cfg.targets) or list(dataset.targets)
    results = []
    for target in targets:
        for policy in cfg.policies:
            results.append(replay_run(dataset, target, policy, cfg.runs, cfg.horizon_fraction,
                                      cfg.T, cfg.noise_sd, cfg.prior_sd, cfg.policy_config, cfg.seed))
            logger.info("target %s policy %s regret %.3f", target, policy, results[-1].mean)
    return results
