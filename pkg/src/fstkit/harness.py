"""Configuration, ground-truth oracle, experiment runner, and reporting.

The experiment repeats, for each method and each test-set size, many
independent trials of estimating the vehicle-under-test crash rate, then
aggregates mean absolute error and the variance of the estimate across
trials. Everything is reproducible: trial seeds fan out from one base
seed through sha256, records are sorted before writing, and floats are
formatted with fixed precision, so identical (config, seed) runs produce
byte-identical CSVs.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .baselines import cmc_sample, estimate, rqmc_sample
from .cutin_sim import (
    CrashMap,
    IdmParams,
    SimConfig,
    SurrogateSet,
    compute_crash_map,
    crash_rate,
)
from .fst_estimator import TestSet
from .fst_optimizer import OptimizerConfig, evaluate_av, synthesize
from .scenario_space import (
    ConfigError,
    ExposurePmf,
    ScenarioGrid,
    build_exposure,
    build_grid,
)

__all__ = [
    "ConfigError",
    "World",
    "ExperimentConfig",
    "TrialRecord",
    "load_config",
    "default_config",
    "config_hash",
    "build_world",
    "oracle_mu",
    "fan_seed",
    "run_experiment",
    "write_records_csv",
    "read_records_csv",
    "summarize",
    "format_summary_table",
    "write_testset_json",
    "read_testset_json",
]

METHODS = ("NDE", "UNIFORM", "FST")

CSV_HEADER = ["method", "n", "trial", "mu_hat", "mu_true", "abs_error"]


# ---------------------------------------------------------------------------
# configuration


def default_config() -> dict:
    """The packaged default configuration as a fresh dict."""
    with resources.files("fstkit").joinpath("data/default_config.json").open(
        "r", encoding="utf-8"
    ) as fh:
        return json.load(fh)


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path: str | None = None) -> dict:
    """Load a config file, layered over the packaged defaults."""
    config = default_config()
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                user = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError(f"config file {path} must contain a JSON object")
        config = _deep_merge(config, user)
    return config


def config_hash(config: dict) -> str:
    """Stable hash of a config dict (canonical JSON, sha256)."""
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _require(config: dict, path: str):
    node = config
    for key in path.split("."):
        if not isinstance(node, dict) or key not in node:
            raise ConfigError(f"config is missing key {path!r}")
        node = node[key]
    return node


def _idm_params(section: dict, where: str) -> IdmParams:
    try:
        return IdmParams(
            v0=float(section["v0"]),
            T=float(section["T"]),
            a_max=float(section["a_max"]),
            b=float(section["b"]),
            s0=float(section["s0"]),
            delta=float(section.get("delta", 4.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad IDM parameters at {where}: {exc}") from exc


@dataclass(frozen=True)
class ExperimentConfig:
    """Protocol for the repeated-trial comparison."""

    n_values: tuple[int, ...] = (5, 10, 20)
    trials: int = 100
    methods: tuple[str, ...] = METHODS
    base_seed: int = 42
    restarts: int = 2
    max_iters: int = 60
    workers: int = 0

    def __post_init__(self) -> None:
        if not self.n_values:
            raise ConfigError("experiment.n_values must be nonempty")
        if self.trials < 1:
            raise ConfigError("experiment.trials must be at least 1")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ConfigError(f"experiment.methods must be a nonempty subset of {METHODS}")


@dataclass
class World:
    """Everything the harness needs, built once from a config dict."""

    config: dict
    grid: ScenarioGrid
    pmf: ExposurePmf
    sim: SimConfig
    av_params: IdmParams
    vertex_params: dict[str, IdmParams]
    optimizer: dict
    experiment: ExperimentConfig
    _maps: dict[str, CrashMap] = field(default_factory=dict, repr=False)

    @property
    def hash(self) -> str:
        return config_hash(self.config)

    def model_params(self, name: str) -> IdmParams:
        if name == "av":
            return self.av_params
        if name in self.vertex_params:
            return self.vertex_params[name]
        raise ConfigError(f"unknown model {name!r}; have av, {', '.join(self.vertex_params)}")

    def crash_map(self, name: str) -> CrashMap:
        if name not in self._maps:
            self._maps[name] = compute_crash_map(self.model_params(name), self.grid, self.sim)
        return self._maps[name]

    def surrogate_set(self) -> SurrogateSet:
        return SurrogateSet(
            vertices=tuple(self.crash_map(name) for name in self.vertex_params)
        )


def build_world(config: dict) -> World:
    grid = build_grid(_require(config, "grid.bounds"), _require(config, "grid.steps"))
    pmf = build_exposure(grid, _require(config, "exposure.mixture"))
    sim_cfg = _require(config, "sim")
    try:
        sim = SimConfig(
            dt=float(sim_cfg["dt"]),
            horizon=float(sim_cfg["horizon"]),
            v_av0=float(sim_cfg["v_av0"]),
            d_th=float(sim_cfg["d_th"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad sim section: {exc}") from exc
    av = _idm_params(_require(config, "models.av"), "models.av")
    vertices_cfg = _require(config, "models.vertices")
    if not isinstance(vertices_cfg, dict) or len(vertices_cfg) < 2:
        raise ConfigError("models.vertices must map at least 2 model names to parameters")
    vertices = {
        name: _idm_params(section, f"models.vertices.{name}")
        for name, section in vertices_cfg.items()
    }
    exp_cfg = config.get("experiment", {})
    try:
        experiment = ExperimentConfig(
            n_values=tuple(int(n) for n in exp_cfg.get("n_values", (5, 10, 20))),
            trials=int(exp_cfg.get("trials", 100)),
            methods=tuple(exp_cfg.get("methods", METHODS)),
            base_seed=int(exp_cfg.get("base_seed", 42)),
            restarts=int(exp_cfg.get("restarts", 2)),
            max_iters=int(exp_cfg.get("max_iters", 60)),
            workers=int(exp_cfg.get("workers", 0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad experiment section: {exc}") from exc
    return World(
        config=config,
        grid=grid,
        pmf=pmf,
        sim=sim,
        av_params=av,
        vertex_params=vertices,
        optimizer=dict(config.get("optimizer", {})),
        experiment=experiment,
    )


def oracle_mu(world: World, model: str) -> float:
    """Full-grid ground-truth crash rate for a configured model."""
    return crash_rate(world.crash_map(model), world.pmf)


# ---------------------------------------------------------------------------
# experiment


@dataclass(frozen=True)
class TrialRecord:
    method: str
    n: int
    trial_index: int
    mu_hat: float
    mu_true: float
    abs_error: float

    def __post_init__(self) -> None:
        if self.abs_error != abs(self.mu_hat - self.mu_true):
            raise ValueError("abs_error must equal |mu_hat - mu_true| exactly")


def fan_seed(base_seed: int, method: str, n: int, trial: int) -> int:
    """Independent per-trial seed derived from the base seed.

    sha256 rather than hash() so the fan-out is stable across processes
    and Python versions.
    """
    digest = hashlib.sha256(f"{base_seed}:{method}:{n}:{trial}".encode("ascii")).digest()
    return int.from_bytes(digest[:8], "big")


def _optimizer_config(world: World, n: int, seed: int) -> OptimizerConfig:
    opt = world.optimizer
    exp = world.experiment
    return OptimizerConfig(
        n=n,
        restarts=exp.restarts,
        max_iters=exp.max_iters,
        init_step=float(opt.get("init_step", 0.5)),
        min_step=float(opt.get("min_step", 0.0028)),
        seed=seed,
        w_m=_parse_w_m(opt.get("w_m", 1.0)),
    )


def _parse_w_m(value) -> float:
    if isinstance(value, str):
        if value.upper() in ("INF", "INFINITY"):
            return math.inf
        raise ConfigError(f"optimizer.w_m must be a number or 'INF', got {value!r}")
    w = float(value)
    if w < 0:
        raise ConfigError("optimizer.w_m must be nonnegative")
    return w


def _run_trial(world: World, sset: SurrogateSet, av_map: CrashMap, mu_true: float,
               method: str, n: int, trial: int) -> TrialRecord:
    seed = fan_seed(world.experiment.base_seed, method, n, trial)
    if method == "NDE":
        draw = cmc_sample(n, world.pmf, world.grid, seed)
        mu_hat = estimate(draw, av_map, world.grid)
    elif method == "UNIFORM":
        draw = rqmc_sample(n, world.pmf, world.grid, seed)
        mu_hat = estimate(draw, av_map, world.grid)
    elif method == "FST":
        ts, _ = synthesize(_optimizer_config(world, n, seed), sset, world.pmf, world.grid)
        mu_hat, _ = evaluate_av(ts, av_map, world.pmf, world.grid)
    else:
        raise ConfigError(f"unknown method {method!r}")
    return TrialRecord(
        method=method,
        n=n,
        trial_index=trial,
        mu_hat=mu_hat,
        mu_true=mu_true,
        abs_error=abs(mu_hat - mu_true),
    )


def run_experiment(world: World, base_seed: int | None = None) -> list[TrialRecord]:
    """All trials for the configured methods and sizes, order-deterministic.

    Trials are independent; they may run on a thread pool (workers > 1),
    and records are sorted by (method, n, trial) before returning, so the
    output does not depend on scheduling.
    """
    if base_seed is not None:
        exp = world.experiment
        world.experiment = ExperimentConfig(
            n_values=exp.n_values,
            trials=exp.trials,
            methods=exp.methods,
            base_seed=base_seed,
            restarts=exp.restarts,
            max_iters=exp.max_iters,
            workers=exp.workers,
        )
    exp = world.experiment
    av_map = world.crash_map("av")
    mu_true = crash_rate(av_map, world.pmf)
    sset = world.surrogate_set() if "FST" in exp.methods else None
    jobs = [
        (method, n, trial)
        for method in exp.methods
        for n in exp.n_values
        for trial in range(exp.trials)
    ]
    workers = exp.workers if exp.workers > 0 else min(8, os.cpu_count() or 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(
                pool.map(lambda job: _run_trial(world, sset, av_map, mu_true, *job), jobs)
            )
    else:
        records = [_run_trial(world, sset, av_map, mu_true, *job) for job in jobs]
    records.sort(key=lambda r: (r.method, r.n, r.trial_index))
    return records


# ---------------------------------------------------------------------------
# records and summaries


def write_records_csv(records, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(CSV_HEADER) + "\n")
        for r in records:
            fh.write(
                f"{r.method},{r.n},{r.trial_index},"
                f"{r.mu_hat:.17g},{r.mu_true:.17g},{r.abs_error:.17g}\n"
            )


def read_records_csv(path) -> list[TrialRecord]:
    records = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise ValueError(f"{path}: expected header {','.join(CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                method, n, trial, mu_hat, mu_true, abs_error = row
                record = TrialRecord(
                    method=method,
                    n=int(n),
                    trial_index=int(trial),
                    mu_hat=float(mu_hat),
                    mu_true=float(mu_true),
                    abs_error=float(abs_error),
                )
            except (ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed row: {exc}") from exc
            records.append(record)
    return records


def summarize(records) -> list[dict]:
    """Per (method, n) aggregates: mean |error| and variance of mu_hat.

    Variance is the population variance of mu_hat across trials (not of
    the error); recomputing either from the CSV is straightforward.
    """
    groups: dict[tuple[str, int], list[TrialRecord]] = {}
    for r in records:
        groups.setdefault((r.method, r.n), []).append(r)
    summary = []
    for (method, n), rows in sorted(groups.items()):
        mu_hats = np.array([r.mu_hat for r in rows])
        errors = np.array([r.abs_error for r in rows])
        summary.append(
            {
                "method": method,
                "n": n,
                "mean_abs_error": float(errors.mean()),
                "variance_mu_hat": float(mu_hats.var()),
                "trials": len(rows),
            }
        )
    return summary


def format_summary_table(summary) -> str:
    lines = [f"{'method':<8} {'n':>4} {'mean_abs_error':>16} {'variance_mu_hat':>16} {'trials':>7}"]
    for row in summary:
        lines.append(
            f"{row['method']:<8} {row['n']:>4} {row['mean_abs_error']:>16.6e} "
            f"{row['variance_mu_hat']:>16.6e} {row['trials']:>7}"
        )
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# test-set files


def write_testset_json(
    path,
    method: str,
    points: np.ndarray,
    *,
    weights: np.ndarray | None = None,
    seed: int | None = None,
    objective: dict | None = None,
    cfg_hash: str | None = None,
) -> None:
    payload = {
        "method": method,
        "n": int(points.shape[0]),
        "points": [{"r": float(r), "rdot": float(rd)} for r, rd in points],
        "weights": None if weights is None else [float(w) for w in weights],
        "seed": seed,
        "objective": objective,
        "config_hash": cfg_hash,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def read_testset_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    try:
        points = np.array(
            [[float(p["r"]), float(p["rdot"])] for p in payload["points"]]
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{path}: malformed test-set file: {exc}") from exc
    payload["points"] = points
    if payload.get("weights") is not None:
        weights = np.asarray(payload["weights"], dtype=np.float64)
        if weights.shape != (points.shape[0],):
            raise ValueError(f"{path}: weights length does not match points")
        payload["weights"] = weights
    return payload


def evaluate_testset(world: World, payload: dict, model: str = "av") -> dict:
    """Evaluate a stored test set (any method) against a configured model."""
    cmap = world.crash_map(model)
    mu_true = crash_rate(cmap, world.pmf)
    points = payload["points"]
    weights = payload.get("weights")
    if weights is None:
        ts = TestSet(points=points)
        mu_hat, _ = evaluate_av(ts, cmap, world.pmf, world.grid)
    else:
        responses = [
            float(cmap.values[world.grid.cell_index(r, rd)]) for r, rd in points
        ]
        mu_hat = math.fsum(w * resp for w, resp in zip(weights, responses))
    return {
        "method": payload.get("method"),
        "model": model,
        "n": int(points.shape[0]),
        "mu_hat": mu_hat,
        "mu_true": mu_true,
        "abs_error": abs(mu_hat - mu_true),
    }
