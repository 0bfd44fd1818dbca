"""Config-driven experiment runner.

A JSON config names a data-generating process, a list of methods with their
fit options, a replication count, and an evaluation mode. Replication r
regenerates the dataset with seed ``seed_base + r``, fits every method, and
scores it against the ground-truth effect surface; records are aggregated
per method. Runs are fully deterministic in (config, seed_base), including
under replication-level thread parallelism (``CATE_BENCH_THREADS`` caps the
worker count, defaulting to the logical core count).

Penalty units: by default (``"lambda_scale": "raw_loss"``) a method's
``lambda`` is read against the unnormalized squared-error loss
``||r||^2 + lambda * ||b||_1`` — the units in which the reference benchmark
value 1.0 was chosen — and is converted per method and per arm into the
solver's normalized objective. Set ``"lambda_scale": "objective"`` to pass
``lambda`` straight through to the solver.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .data import ObservationSet, load_csv, load_truth_json
from .errors import ConfigError
from .estimators import (
    METHODS,
    FitOptions,
    fit_cate_lasso,
    fit_ipw_learner,
    fit_t_learner,
    rmse_against_cate,
    rmse_against_truth,
)
from .simulate import IhdpConfig, SimConfig, draw_fresh_covariates, gen_ihdp_surface_a, gen_synthetic
from .data import split_by_arm

LAMBDA_SCALES = ("raw_loss", "objective")


@dataclass(frozen=True)
class DatasetSource:
    """A fixed dataset on disk: CSV plus ground-truth sidecar."""

    csv: str
    truth: Optional[str] = None


@dataclass(frozen=True)
class MethodSpec:
    """One benchmark entry: a method name plus its fit options."""

    method: str
    lam: float = 1.0
    delta: float = 0.5
    tol: float = 1e-8
    max_iter: int = 10_000
    warm_start: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.lam < 0:
            raise ConfigError("lambda must be >= 0")


@dataclass(frozen=True)
class ExperimentConfig:
    dgp: Union[SimConfig, IhdpConfig, DatasetSource]
    methods: tuple[MethodSpec, ...]
    replications: int = 100
    seed_base: int = 0
    eval_mode: str = "in_sample"
    holdout_fraction: float = 0.5
    lambda_scale: str = "raw_loss"
    stem: str = "experiment"
    formats: tuple[str, ...] = ("csv", "json")
    theory_t: float = 2.0
    theory_budget: int = 10_000

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if not self.methods:
            raise ConfigError("at least one method is required")
        if self.eval_mode not in ("in_sample", "holdout"):
            raise ConfigError("eval must be 'in_sample' or 'holdout'")
        if self.eval_mode == "holdout" and not 0.0 < self.holdout_fraction <= 1.0:
            raise ConfigError("holdout fraction must lie in (0, 1]")
        if self.lambda_scale not in LAMBDA_SCALES:
            raise ConfigError(f"lambda_scale must be one of {LAMBDA_SCALES}")
        if self.eval_mode == "holdout" and isinstance(self.dgp, DatasetSource):
            raise ConfigError("holdout evaluation needs a generative dgp, not a fixed dataset")


@dataclass(frozen=True)
class RunRecord:
    replication: int
    method: str
    rmse: float
    lambda_used: float
    converged: bool
    wall_ms: float
    error: Optional[str] = None


@dataclass(frozen=True)
class RunResult:
    records: tuple[RunRecord, ...]
    aggregates: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------

def _parse_dgp(node: dict):
    kind = node.get("kind")
    try:
        if kind == "synthetic":
            return SimConfig(
                n=int(node.get("n", 500)),
                p=int(node.get("p", 300)),
                s0=int(node.get("s0", 10)),
                seed=int(node.get("seed", 0)),
                common_mode=node.get("common_mode", "dense_common"),
                noise_sd=float(node.get("noise_sd", 1.0)),
                coef_range=float(node.get("coef_range", 10.0)),
            )
        if kind == "ihdp":
            return IhdpConfig(
                source=node.get("source", "synthetic_surrogate"),
                csv=node.get("csv"),
                extension=node.get("extension", "none"),
                extra_dim=int(node.get("extra_dim", 500)),
                seed=int(node.get("seed", 0)),
            )
        if kind == "dataset":
            if "csv" not in node:
                raise ConfigError("dataset dgp needs a 'csv' path")
            return DatasetSource(csv=node["csv"], truth=node.get("truth"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad dgp block: {exc}") from exc
    raise ConfigError(f"unknown dgp kind {kind!r}")


def _parse_method(node: dict) -> MethodSpec:
    try:
        return MethodSpec(
            method=node["method"],
            lam=float(node.get("lambda", 1.0)),
            delta=float(node.get("delta", 0.5)),
            tol=float(node.get("tol", 1e-8)),
            max_iter=int(node.get("max_iter", 10_000)),
            warm_start=bool(node.get("warm_start", True)),
        )
    except KeyError as exc:
        raise ConfigError(f"method entry is missing {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad method entry: {exc}") from exc


def parse_config(payload: dict) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from a decoded JSON document."""
    if not isinstance(payload, dict):
        raise ConfigError("config root must be a JSON object")
    if "dgp" not in payload or "methods" not in payload:
        raise ConfigError("config needs 'dgp' and 'methods' blocks")
    eval_node = payload.get("eval", {"kind": "in_sample"})
    if isinstance(eval_node, str):
        eval_node = {"kind": eval_node}
    output = payload.get("output", {})
    try:
        return ExperimentConfig(
            dgp=_parse_dgp(payload["dgp"]),
            methods=tuple(_parse_method(m) for m in payload["methods"]),
            replications=int(payload.get("replications", 100)),
            seed_base=int(payload.get("seed_base", 0)),
            eval_mode=eval_node.get("kind", "in_sample"),
            holdout_fraction=float(eval_node.get("fraction", 0.5)),
            lambda_scale=payload.get("lambda_scale", "raw_loss"),
            stem=output.get("stem", "experiment"),
            formats=tuple(output.get("formats", ["csv", "json"])),
            theory_t=float(payload.get("theory", {}).get("t", 2.0)),
            theory_budget=int(payload.get("theory", {}).get("budget", 10_000)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(payload)


# ---------------------------------------------------------------------------
# Running
# ---------------------------------------------------------------------------

def make_dataset(dgp, seed: int) -> ObservationSet:
    """Materialize the dataset for one replication."""
    if isinstance(dgp, SimConfig):
        return gen_synthetic(replace(dgp, seed=seed))
    if isinstance(dgp, IhdpConfig):
        return gen_ihdp_surface_a(replace(dgp, seed=seed))
    if isinstance(dgp, DatasetSource):
        truth = load_truth_json(dgp.truth) if dgp.truth else None
        return load_csv(dgp.csv, truth=truth)
    raise ConfigError(f"unsupported dgp type {type(dgp).__name__}")


def solver_lambda(spec: MethodSpec, scale: str, n: int, m1: int, m0: int):
    """Solver-units penalty for one method on one dataset.

    In raw-loss units the conversion matches each method's loss
    normalization: the two-step fit uses ``delta/(2n)``, the per-arm lasso
    ``1/(2 m_d)`` per arm, and the pseudo-outcome lasso ``1/(2n)``.
    """
    if spec.method in ("t_ols", "ipw_ols"):
        return 0.0
    if scale == "objective":
        if spec.method == "t_lasso":
            return (spec.lam, spec.lam)
        return spec.lam
    if spec.method == "cate_lasso":
        return spec.lam * spec.delta / (2.0 * n)
    if spec.method == "t_lasso":
        return (spec.lam / (2.0 * m1), spec.lam / (2.0 * m0))
    if spec.method == "ipw_lasso":
        return spec.lam / (2.0 * n)
    raise ConfigError(f"no penalty rule for {spec.method!r}")


def fit_method(spec: MethodSpec, data: ObservationSet, lambda_scale: str):
    """Dispatch one method on one dataset."""
    split = split_by_arm(data)
    lam = solver_lambda(spec, lambda_scale, data.n, split.m1, split.m0)
    if spec.method == "cate_lasso":
        opts = FitOptions(lam=lam, delta=spec.delta, tol=spec.tol,
                          max_iter=spec.max_iter, warm_start=spec.warm_start)
        return fit_cate_lasso(split, opts)
    if spec.method == "t_ols":
        return fit_t_learner(split, regressor="min_norm_ols")
    if spec.method == "t_lasso":
        return fit_t_learner(split, regressor="lasso", lam=lam, tol=spec.tol,
                             max_iter=spec.max_iter, warm_start=spec.warm_start)
    if spec.method in ("ipw_ols", "ipw_lasso"):
        if data.truth is None or data.truth.propensities is None:
            raise ConfigError("IPW methods need ground-truth propensities")
        regressor = "min_norm_ols" if spec.method == "ipw_ols" else "lasso"
        return fit_ipw_learner(data, data.truth.propensities, regressor=regressor,
                               lam=lam if regressor == "lasso" else 0.0,
                               tol=spec.tol, max_iter=spec.max_iter,
                               warm_start=spec.warm_start)
    raise ConfigError(f"no fitter for {spec.method!r}")


def _score(cfg: ExperimentConfig, model, data: ObservationSet, rep_seed: int) -> float:
    if cfg.eval_mode == "in_sample":
        return rmse_against_truth(model, data)
    count = max(1, round(cfg.holdout_fraction * data.n))
    fresh = draw_fresh_covariates(cfg.dgp, count, seed=rep_seed)
    return rmse_against_cate(model, fresh, data.truth.beta_diff)


def _run_replication(cfg: ExperimentConfig, r: int) -> list[RunRecord]:
    seed = cfg.seed_base + r
    data = make_dataset(cfg.dgp, seed)
    records = []
    for spec in cfg.methods:
        start = time.perf_counter()
        try:
            model = fit_method(spec, data, cfg.lambda_scale)
            rmse = _score(cfg, model, data, seed)
            trace = model.solver_trace
            records.append(RunRecord(
                replication=r,
                method=spec.method,
                rmse=rmse,
                lambda_used=model.lambda_used,
                converged=trace.converged if trace is not None else True,
                wall_ms=(time.perf_counter() - start) * 1e3,
            ))
        except Exception as exc:  # recorded per record, never fatal
            records.append(RunRecord(
                replication=r,
                method=spec.method,
                rmse=float("nan"),
                lambda_used=0.0,
                converged=False,
                wall_ms=(time.perf_counter() - start) * 1e3,
                error=f"{type(exc).__name__}: {exc}",
            ))
    return records


def thread_count() -> int:
    """Worker count: CATE_BENCH_THREADS if set, else the logical core count."""
    env = os.environ.get("CATE_BENCH_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"CATE_BENCH_THREADS must be an integer: {env!r}") from exc
    return os.cpu_count() or 1


def aggregate(records) -> dict:
    """Per-method summary of the RMSE distribution (type-7 quantiles)."""
    out = {}
    by_method = {}
    for rec in records:
        by_method.setdefault(rec.method, []).append(rec.rmse)
    for method, values in by_method.items():
        arr = np.asarray([v for v in values if not np.isnan(v)], dtype=np.float64)
        if arr.size == 0:
            out[method] = {"median": float("nan"), "mean": float("nan"),
                           "q1": float("nan"), "q3": float("nan"),
                           "count": 0, "failures": len(values)}
            continue
        out[method] = {
            "median": float(np.quantile(arr, 0.5)),
            "mean": float(arr.mean()),
            "q1": float(np.quantile(arr, 0.25)),
            "q3": float(np.quantile(arr, 0.75)),
            "count": int(arr.size),
            "failures": len(values) - int(arr.size),
        }
    return out


def run_experiment(cfg: ExperimentConfig, workers: Optional[int] = None) -> RunResult:
    """Run every replication and aggregate; deterministic in (cfg, seed_base)."""
    workers = workers if workers is not None else thread_count()
    per_rep: list[Optional[list[RunRecord]]] = [None] * cfg.replications
    if workers > 1 and cfg.replications > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_run_replication, cfg, r): r for r in range(cfg.replications)}
            for fut, r in futures.items():
                per_rep[r] = fut.result()
    else:
        for r in range(cfg.replications):
            per_rep[r] = _run_replication(cfg, r)
    method_order = {spec.method: i for i, spec in enumerate(cfg.methods)}
    records = [rec for chunk in per_rep for rec in chunk]
    records.sort(key=lambda rec: (rec.replication, method_order[rec.method]))
    return RunResult(records=tuple(records), aggregates=aggregate(records))
