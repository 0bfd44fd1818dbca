import json

import numpy as np
import pytest

from catelasso.bench import (
    ExperimentConfig,
    MethodSpec,
    RunRecord,
    RunResult,
    aggregate,
    load_config,
    make_dataset,
    parse_config,
    run_experiment,
    solver_lambda,
)
from catelasso.errors import ConfigError
from catelasso.report import box_stats, render_csv, render_json, render_svg_boxplot
from catelasso.simulate import SimConfig


def small_config(**overrides):
    payload = {
        "dgp": {"kind": "synthetic", "n": 60, "p": 8, "s0": 2, "noise_sd": 0.0},
        "methods": [{"method": "cate_lasso", "lambda": 1e-8}],
        "replications": 1,
        "seed_base": 5,
        "lambda_scale": "objective",
    }
    payload.update(overrides)
    return parse_config(payload)


def test_single_replication_exact_recovery():
    result = run_experiment(small_config(), workers=1)
    assert len(result.records) == 1
    assert result.records[0].rmse < 1e-4


def test_record_cardinality():
    cfg = small_config(
        methods=[{"method": "cate_lasso", "lambda": 1e-8}, {"method": "t_ols"}],
        replications=3,
    )
    result = run_experiment(cfg, workers=2)
    assert len(result.records) == 6
    assert [r.replication for r in result.records] == [0, 0, 1, 1, 2, 2]


def test_determinism_across_runs_and_workers():
    cfg = small_config(
        dgp={"kind": "synthetic", "n": 80, "p": 12, "s0": 3, "noise_sd": 1.0},
        methods=[{"method": "cate_lasso", "lambda": 0.05},
                 {"method": "t_lasso", "lambda": 0.05},
                 {"method": "ipw_lasso", "lambda": 0.05}],
        replications=4,
    )
    a = render_csv(run_experiment(cfg, workers=1))
    b = render_csv(run_experiment(cfg, workers=3))
    assert a == b


def test_aggregates_permutation_invariant():
    cfg = small_config(
        dgp={"kind": "synthetic", "n": 70, "p": 10, "s0": 2, "noise_sd": 1.0},
        methods=[{"method": "cate_lasso", "lambda": 0.1}, {"method": "t_ols"}],
        replications=5,
    )
    result = run_experiment(cfg, workers=1)
    reversed_records = tuple(reversed(result.records))
    assert aggregate(reversed_records) == result.aggregates


def test_quartiles_match_type7_reference():
    rng = np.random.default_rng(17)
    values = rng.uniform(0, 10, 100)
    records = tuple(
        RunRecord(replication=i, method="m", rmse=float(v), lambda_used=0.0,
                  converged=True, wall_ms=0.0)
        for i, v in enumerate(values)
    )
    agg = aggregate(records)["m"]

    def type7(sorted_vals, q):
        h = (len(sorted_vals) - 1) * q
        lo = int(np.floor(h))
        hi = min(lo + 1, len(sorted_vals) - 1)
        return sorted_vals[lo] + (h - lo) * (sorted_vals[hi] - sorted_vals[lo])

    s = np.sort(values)
    assert agg["q1"] == pytest.approx(type7(s, 0.25), rel=1e-12)
    assert agg["median"] == pytest.approx(type7(s, 0.5), rel=1e-12)
    assert agg["q3"] == pytest.approx(type7(s, 0.75), rel=1e-12)


def test_fit_errors_recorded_not_fatal():
    # IPW without propensities: the record carries the error, the run survives
    cfg = small_config(
        dgp={"kind": "synthetic", "n": 50, "p": 6, "s0": 2, "noise_sd": 1.0},
        methods=[{"method": "t_ols"}, {"method": "ipw_ols"}],
    )
    data = make_dataset(cfg.dgp, 5)
    assert data.truth.propensities is not None  # synthetic dgp provides them

    # force the failure through a dataset source missing the sidecar
    import tempfile
    from pathlib import Path

    from catelasso.data import save_csv

    with tempfile.TemporaryDirectory() as tmp:
        csv_path = Path(tmp) / "d.csv"
        save_csv(data, csv_path)
        cfg2 = parse_config({
            "dgp": {"kind": "dataset", "csv": str(csv_path)},
            "methods": [{"method": "ipw_ols"}],
            "replications": 1,
        })
        result = run_experiment(cfg2, workers=1)
    rec = result.records[0]
    assert np.isnan(rec.rmse)
    assert rec.error is not None
    assert result.aggregates["ipw_ols"]["failures"] == 1


def test_holdout_evaluation_uses_fresh_rows():
    cfg = small_config(
        dgp={"kind": "synthetic", "n": 60, "p": 8, "s0": 2, "noise_sd": 0.0},
        methods=[{"method": "cate_lasso", "lambda": 1e-8}],
        eval={"kind": "holdout", "fraction": 0.5},
    )
    result = run_experiment(cfg, workers=1)
    assert result.records[0].rmse < 1e-4


def test_solver_lambda_conversions():
    spec = MethodSpec(method="cate_lasso", lam=1.0, delta=0.5)
    assert solver_lambda(spec, "raw_loss", 500, 250, 250) == pytest.approx(0.5 / 1000)
    assert solver_lambda(spec, "objective", 500, 250, 250) == 1.0
    t = MethodSpec(method="t_lasso", lam=1.0)
    lam1, lam0 = solver_lambda(t, "raw_loss", 500, 260, 240)
    assert lam1 == pytest.approx(1.0 / 520)
    assert lam0 == pytest.approx(1.0 / 480)
    ipw = MethodSpec(method="ipw_lasso", lam=2.0)
    assert solver_lambda(ipw, "raw_loss", 500, 260, 240) == pytest.approx(1.0 / 500)
    assert solver_lambda(MethodSpec(method="t_ols"), "raw_loss", 500, 1, 1) == 0.0


def test_config_validation_errors():
    with pytest.raises(ConfigError):
        parse_config({"methods": [{"method": "t_ols"}]})
    with pytest.raises(ConfigError):
        parse_config({"dgp": {"kind": "synthetic"}, "methods": []})
    with pytest.raises(ConfigError):
        parse_config({"dgp": {"kind": "bogus"}, "methods": [{"method": "t_ols"}]})
    with pytest.raises(ConfigError):
        parse_config({"dgp": {"kind": "synthetic"}, "methods": [{"method": "nope"}]})
    with pytest.raises(ConfigError):
        small_config(lambda_scale="per_arm")
    with pytest.raises(ConfigError):
        load_config("/nonexistent/config.json")


def test_csv_rendering_shape():
    records = (RunRecord(replication=0, method="cate_lasso", rmse=1.25,
                         lambda_used=0.5, converged=True, wall_ms=12.5),)
    text = render_csv(RunResult(records=records, aggregates={}))
    lines = text.strip().split("\n")
    assert lines[0] == "replication,method,rmse,lambda,converged,wall_ms"
    assert lines[1] == "0,cate_lasso,1.25,0.5,true,0"
    assert len(lines) == 2
    timed = render_csv(RunResult(records=records, aggregates={}), include_timings=True)
    assert timed.strip().split("\n")[1].endswith("12.5")


def test_json_mirrors_result():
    records = (RunRecord(replication=0, method="t_ols", rmse=2.0,
                         lambda_used=0.0, converged=True, wall_ms=3.0),)
    result = RunResult(records=records, aggregates=aggregate(records))
    payload = json.loads(render_json(result))
    assert payload["records"][0]["method"] == "t_ols"
    assert payload["records"][0]["wall_ms"] == 0
    assert payload["aggregates"]["t_ols"]["median"] == 2.0


def test_box_stats_degenerate():
    s = box_stats([3.0] * 10)
    assert s["q1"] == s["median"] == s["q3"] == s["lo"] == s["hi"] == 3.0
    assert s["outliers"] == []


def test_box_stats_whiskers_within_fences():
    rng = np.random.default_rng(23)
    vals = np.concatenate([rng.normal(0, 1, 200), [25.0]])
    s = box_stats(vals)
    iqr = s["q3"] - s["q1"]
    assert s["hi"] <= s["q3"] + 1.5 * iqr
    assert s["lo"] >= s["q1"] - 1.5 * iqr
    assert 25.0 in s["outliers"]


def test_svg_renders_methods_and_degenerate_box():
    records = tuple(
        RunRecord(replication=i, method=m, rmse=v, lambda_used=0.0,
                  converged=True, wall_ms=0.0)
        for i, (m, v) in enumerate([("a", 1.0), ("a", 1.0), ("b", 2.0), ("b", 3.0)])
    )
    svg = render_svg_boxplot(RunResult(records=records, aggregates={}))
    assert svg.startswith("<svg")
    assert ">a</text>" in svg and ">b</text>" in svg
