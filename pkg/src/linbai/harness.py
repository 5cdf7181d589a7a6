"""Experiment orchestration: seeded repetitions, metrics, persistence.

One experiment = one instance x several strategy configs x R repetitions.
Each (strategy, repetition) pair gets two independent random streams derived
from the master seed: one drives the trajectory, the other the Monte Carlo
confidence estimates, so recomputing metrics can never perturb a run.  At
every checkpoint t the harness records the posterior confidence
P_{theta ~ N(theta_hat, V_t^-1)}(argmax = z_star), whether the current
estimate is correct, cumulative rejection draws, and elapsed wall time.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels, rng as rng_mod
from .errors import ConfigError
from .instances import Instance, load_instance
from .sampling import PosteriorSpec, is_exact_confidence, posterior_confidence
from .strategies import make_strategy, strategy_label

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "instance_id",
    "strategy",
    "seed",
    "t",
    "posterior_confidence",
    "z_hat_correct",
    "rejections_cumulative",
    "wall_ms",
)

ERROR_COLUMNS = ("instance_id", "strategy", "seed", "error")


@dataclass
class MetricRow:
    instance_id: str
    strategy: str
    seed: int
    t: int
    posterior_confidence: float
    z_hat_correct: int
    rejections_cumulative: int
    wall_ms: float

    def __post_init__(self):
        if not (0.0 <= self.posterior_confidence <= 1.0):
            raise ConfigError(
                f"posterior_confidence must lie in [0,1], got {self.posterior_confidence}"
            )


@dataclass
class ErrorRow:
    instance_id: str
    strategy: str
    seed: int
    error: str


def default_checkpoints(t_max: int, stride: int | None = None) -> list[int]:
    """Every `stride` steps; by default every 10 up to 1000, every 100 beyond."""
    if t_max < 1:
        raise ConfigError(f"t_max must be >= 1, got {t_max}")
    if stride is not None:
        if stride < 1:
            raise ConfigError(f"checkpoint stride must be >= 1, got {stride}")
        points = list(range(stride, t_max + 1, stride))
    else:
        points = list(range(10, min(t_max, 1000) + 1, 10))
        points += list(range(1100, t_max + 1, 100))
    if not points or points[-1] != t_max:
        points.append(t_max)
    return points


def _check_checkpoints(points, t_max: int) -> list[int]:
    out = [int(p) for p in points]
    if not out:
        raise ConfigError("checkpoint list is empty")
    if any(p < 1 or p > t_max for p in out):
        raise ConfigError(f"checkpoints must lie in [1, {t_max}]")
    if out != sorted(out) or len(set(out)) != len(out):
        raise ConfigError("checkpoints must be strictly ascending")
    return out


@dataclass
class ExperimentConfig:
    instance: Instance
    strategies: list[dict]
    t_max: int
    repetitions: int
    master_seed: int
    checkpoints: list[int]
    mc_draws: int = 1000
    delta_levels: tuple[float, ...] = (0.1, 0.05, 0.01)

    def __post_init__(self):
        if self.repetitions < 1:
            raise ConfigError(f"repetitions must be >= 1, got {self.repetitions}")
        if self.t_max < 1:
            raise ConfigError(f"t_max must be >= 1, got {self.t_max}")
        if self.mc_draws < 1:
            raise ConfigError(f"mc_draws must be >= 1, got {self.mc_draws}")
        if not self.strategies:
            raise ConfigError("at least one strategy is required")
        if not all(0.0 < d < 1.0 for d in self.delta_levels):
            raise ConfigError(f"delta levels must lie in (0,1), got {self.delta_levels}")
        self.checkpoints = _check_checkpoints(self.checkpoints, self.t_max)
        labels = [strategy_label(s) for s in self.strategies]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"strategy labels must be unique, got {labels}")

    @classmethod
    def from_json_dict(cls, obj: dict, base_dir: str | None = None) -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise ConfigError("experiment config must be a JSON object")
        known = {
            "instance", "strategies", "t_max", "repetitions", "master_seed",
            "confidence_checkpoints", "mc_draws", "delta_levels",
        }
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown experiment config keys: {sorted(unknown)}")
        for required in ("instance", "strategies", "t_max", "repetitions", "master_seed"):
            if required not in obj:
                raise ConfigError(f"experiment config missing key {required!r}")
        inst_spec = obj["instance"]
        if isinstance(inst_spec, str):
            path = inst_spec if os.path.isabs(inst_spec) or base_dir is None \
                else os.path.join(base_dir, inst_spec)
            instance = load_instance(path)
        elif isinstance(inst_spec, dict):
            instance = Instance.from_json_dict(inst_spec)
        else:
            raise ConfigError("instance must be a JSON object or a file path string")
        t_max = int(obj["t_max"])
        cps = obj.get("confidence_checkpoints")
        if cps is None:
            checkpoints = default_checkpoints(t_max)
        elif isinstance(cps, int):
            checkpoints = default_checkpoints(t_max, stride=cps)
        elif isinstance(cps, list):
            checkpoints = cps
        else:
            raise ConfigError("confidence_checkpoints must be a list of t values or an integer stride")
        return cls(
            instance=instance,
            strategies=list(obj["strategies"]),
            t_max=t_max,
            repetitions=int(obj["repetitions"]),
            master_seed=int(obj["master_seed"]),
            checkpoints=checkpoints,
            mc_draws=int(obj.get("mc_draws", 1000)),
            delta_levels=tuple(float(d) for d in obj.get("delta_levels", (0.1, 0.05, 0.01))),
        )

    @classmethod
    def from_json_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                obj = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read experiment config {path}: {exc}") from exc
        return cls.from_json_dict(obj, base_dir=os.path.dirname(os.path.abspath(path)))


class ResultStore:
    """In-memory metric rows plus a sidecar error table, with exact CSV round-trip."""

    def __init__(self, rows=None, errors=None, metadata=None):
        self.rows: list[MetricRow] = list(rows or [])
        self.errors: list[ErrorRow] = list(errors or [])
        self.metadata: dict = dict(metadata or {})

    def append(self, rows) -> None:
        self.rows.extend(rows)

    # -- persistence (floats via repr: exact round-trip)

    def csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.rows:
            writer.writerow([
                r.instance_id, r.strategy, r.seed, r.t,
                repr(r.posterior_confidence), r.z_hat_correct,
                r.rejections_cumulative, repr(r.wall_ms),
            ])
        return buf.getvalue()

    def errors_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(ERROR_COLUMNS)
        for e in self.errors:
            writer.writerow([e.instance_id, e.strategy, e.seed, e.error])
        return buf.getvalue()

    def write(self, out_dir) -> dict:
        os.makedirs(out_dir, exist_ok=True)
        paths = {"results": os.path.join(out_dir, "results.csv")}
        with open(paths["results"], "w", encoding="utf-8", newline="") as fh:
            fh.write(self.csv_text())
        if self.errors:
            paths["errors"] = os.path.join(out_dir, "errors.csv")
            with open(paths["errors"], "w", encoding="utf-8", newline="") as fh:
                fh.write(self.errors_csv_text())
        if self.metadata:
            paths["metadata"] = os.path.join(out_dir, "run_meta.json")
            with open(paths["metadata"], "w", encoding="utf-8") as fh:
                json.dump(self.metadata, fh, indent=2, sort_keys=True)
                fh.write("\n")
        return paths

    @classmethod
    def read_csv(cls, path) -> "ResultStore":
        store = cls()
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header) != CSV_COLUMNS:
                raise ConfigError(f"{path} does not have the expected result columns {CSV_COLUMNS}")
            for rec in reader:
                store.rows.append(MetricRow(
                    instance_id=rec[0], strategy=rec[1], seed=int(rec[2]), t=int(rec[3]),
                    posterior_confidence=float(rec[4]), z_hat_correct=int(rec[5]),
                    rejections_cumulative=int(rec[6]), wall_ms=float(rec[7]),
                ))
        return store

    # -- aggregation

    def strategies(self) -> list[str]:
        seen = dict.fromkeys(r.strategy for r in self.rows)
        return list(seen)

    def t_max(self) -> int:
        if not self.rows:
            raise ConfigError("result store is empty")
        return max(r.t for r in self.rows)

    def mean_confidence_curve(self, strategy: str) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
        """(ts, mean, standard error, n_reps) for one strategy."""
        by_t: dict[int, list[float]] = {}
        for r in self.rows:
            if r.strategy == strategy:
                by_t.setdefault(r.t, []).append(r.posterior_confidence)
        if not by_t:
            raise ConfigError(f"no rows for strategy {strategy!r}")
        ts = np.array(sorted(by_t), dtype=np.int64)
        mean = np.array([np.mean(by_t[t]) for t in ts])
        n = min(len(by_t[t]) for t in ts)
        se = np.array([
            np.std(by_t[t], ddof=1) / math.sqrt(len(by_t[t])) if len(by_t[t]) > 1 else 0.0
            for t in ts
        ])
        return ts, mean, se, n


def samples_to_delta(store: ResultStore, delta: float) -> dict[str, object]:
    """First checkpoint where the mean-over-reps confidence exceeds 1 - delta.

    Strictly greater on the confidence, first (smallest) t on the index;
    strategies that never cross get the sentinel string ">{t_max}".
    """
    if not (0.0 < delta < 1.0):
        raise ConfigError(f"delta must lie in (0,1), got {delta}")
    t_max = store.t_max()
    table: dict[str, object] = {}
    for strat in store.strategies():
        ts, mean, _, _ = store.mean_confidence_curve(strat)
        crossed = np.flatnonzero(mean > 1.0 - delta)
        table[strat] = int(ts[crossed[0]]) if crossed.size else f">{t_max}"
    return table


def run_repetition(instance: Instance, strat_spec: dict, label: str, rep: int,
                   master_seed: int, t_max: int, checkpoints: list[int],
                   mc_draws: int) -> list[MetricRow]:
    """One strategy trajectory with metric rows at the checkpoints."""
    strategy_rng = rng_mod.strategy_stream(master_seed, label, rep)
    metrics_rng = rng_mod.metrics_stream(master_seed, label, rep)
    strategy = make_strategy(instance, strat_spec, t_max)
    targets = instance.targets
    z_star = instance.z_star
    rows: list[MetricRow] = []
    rejections = 0
    cp_iter = iter(checkpoints)
    next_cp = next(cp_iter)
    start = time.perf_counter()
    for t in range(1, t_max + 1):
        out = strategy.step(strategy_rng)
        rejections += out.rejections_used
        if t == next_cp:
            theta_hat = strategy.posterior.theta_hat
            spec = PosteriorSpec(theta_hat.copy(), strategy.posterior.spd, 1.0)
            conf = posterior_confidence(metrics_rng, spec, targets, z_star, mc_draws)
            z_map, _ = targets.argmax(theta_hat)
            rows.append(MetricRow(
                instance_id=instance.name,
                strategy=label,
                seed=rep,
                t=t,
                posterior_confidence=conf,
                z_hat_correct=int(z_map == z_star),
                rejections_cumulative=rejections,
                wall_ms=(time.perf_counter() - start) * 1000.0,
            ))
            next_cp = next(cp_iter, None)
            if next_cp is None:
                break
    return rows


def _worker(args):
    instance, spec, label, rep, master_seed, t_max, checkpoints, mc_draws = args
    try:
        return (label, rep, run_repetition(
            instance, spec, label, rep, master_seed, t_max, checkpoints, mc_draws
        ), None)
    except Exception as exc:  # noqa: BLE001 - repetition isolation is the contract
        logger.exception("repetition failed: strategy=%s rep=%d", label, rep)
        return (label, rep, [], f"{type(exc).__name__}: {exc}")


def resolve_workers(workers: int | None = None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("BANDIT_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"BANDIT_THREADS must be an integer, got {env!r}") from exc
    return os.cpu_count() or 1


def run_experiment(config: ExperimentConfig, workers: int | None = None) -> ResultStore:
    """Run all (strategy, repetition) pairs; order-stable regardless of scheduling."""
    n_workers = resolve_workers(workers)
    tasks = [
        (config.instance, spec, strategy_label(spec), rep, config.master_seed,
         config.t_max, config.checkpoints, config.mc_draws)
        for spec in config.strategies
        for rep in range(config.repetitions)
    ]
    results: dict[tuple[str, int], tuple[list[MetricRow], str | None]] = {}
    if n_workers == 1:
        for task in tasks:
            label, rep, rows, err = _worker(task)
            results[(label, rep)] = (rows, err)
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            for label, rep, rows, err in pool.map(_worker, tasks, chunksize=1):
                results[(label, rep)] = (rows, err)
    store = ResultStore(metadata=_metadata(config, n_workers))
    for spec in config.strategies:
        label = strategy_label(spec)
        for rep in range(config.repetitions):
            rows, err = results[(label, rep)]
            store.append(rows)
            if err is not None:
                store.errors.append(ErrorRow(config.instance.name, label, rep, err))
    store.metadata["aggregates"] = {
        repr(delta): samples_to_delta(store, delta) for delta in config.delta_levels
    } if store.rows else {}
    return store


def _metadata(config: ExperimentConfig, n_workers: int) -> dict:
    return {
        "instance": config.instance.to_json_dict(),
        "strategies": config.strategies,
        "t_max": config.t_max,
        "repetitions": config.repetitions,
        "master_seed": config.master_seed,
        "checkpoints": {"count": len(config.checkpoints), "last": config.checkpoints[-1]},
        "mc_draws": config.mc_draws,
        "delta_levels": list(config.delta_levels),
        "confidence_method": "exact" if is_exact_confidence(config.instance.targets) else "monte_carlo",
        "kernel_backend": kernels.backend_name(),
        "workers": n_workers,
    }
