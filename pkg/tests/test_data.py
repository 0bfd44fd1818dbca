import numpy as np
import pytest

from catelasso.data import (
    CoefVector,
    GroundTruth,
    ObservationSet,
    check_overlap,
    load_csv,
    load_truth_json,
    save_csv,
    save_truth_json,
    split_by_arm,
)
from catelasso.errors import CsvParseError, EmptyArmError, MissingPropensityError


def make_data(x, d, y, truth=None):
    return ObservationSet(covariates=np.asarray(x, dtype=float),
                          treatments=np.asarray(d), outcomes=np.asarray(y, dtype=float),
                          truth=truth)


def test_split_matches_definition():
    data = make_data([[1.0], [2.0], [3.0]], [1, 0, 1], [5.0, 6.0, 7.0])
    split = split_by_arm(data)
    assert split.y1.tolist() == [5.0, 7.0]
    assert split.y0.tolist() == [6.0]
    assert split.n_total == 3


def test_all_treated_is_rejected():
    with pytest.raises(EmptyArmError):
        make_data([[1.0], [2.0]], [1, 1], [0.0, 0.0])


def test_split_rows_match_brute_force_filter():
    x = np.vstack([np.eye(2), np.eye(2)])
    d = np.array([1, 0, 1, 0])
    y = np.arange(4.0)
    split = split_by_arm(make_data(x, d, y))
    # oracle: plain index filter
    rows1 = [x[i] for i in range(4) if d[i] == 1]
    np.testing.assert_array_equal(split.x1, np.asarray(rows1))
    np.testing.assert_array_equal(split.x0, x[d == 0])


def test_split_is_a_partition():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((40, 7))
    d = rng.integers(0, 2, 40)
    d[0], d[1] = 1, 0
    y = rng.standard_normal(40)
    split = split_by_arm(make_data(x, d, y))
    rebuilt_x = np.empty_like(x)
    rebuilt_y = np.empty_like(y)
    rebuilt_x[d == 1], rebuilt_x[d == 0] = split.x1, split.x0
    rebuilt_y[d == 1], rebuilt_y[d == 0] = split.y1, split.y0
    np.testing.assert_array_equal(rebuilt_x, x)
    np.testing.assert_array_equal(rebuilt_y, y)


def test_split_commutes_with_row_shuffles():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((30, 3))
    d = np.array([1, 0] * 15)
    y = rng.standard_normal(30)
    perm = rng.permutation(30)
    split_perm = split_by_arm(make_data(x[perm], d[perm], y[perm]))
    # within-arm order follows input order under any permutation
    order1 = [i for i in perm if d[i] == 1]
    np.testing.assert_array_equal(split_perm.x1, x[order1])
    np.testing.assert_array_equal(split_perm.y1, y[order1])


def test_non_finite_rows_rejected():
    with pytest.raises(ValueError):
        make_data([[np.nan], [1.0]], [1, 0], [0.0, 0.0])
    with pytest.raises(ValueError):
        make_data([[1.0], [1.0]], [1, 0], [np.inf, 0.0])


def test_multivalued_treatment_rejected():
    with pytest.raises(ValueError):
        make_data([[1.0], [1.0], [1.0]], [0, 1, 2], [0.0, 0.0, 0.0])


def test_truth_support_invariant():
    with pytest.raises(ValueError):
        GroundTruth(
            beta1=CoefVector(np.array([1.0, 2.0, 3.0]), role="arm1"),
            beta0=CoefVector(np.array([0.0, 0.0, 0.0]), role="arm0"),
            s0=2,
        )


def overlap_data(propensities):
    n = len(propensities)
    d = np.array([1, 0] * (n // 2) + [1] * (n % 2))
    truth = GroundTruth(
        beta1=CoefVector(np.array([1.0]), role="arm1"),
        beta0=CoefVector(np.array([0.0]), role="arm0"),
        s0=1,
        propensities=np.asarray(propensities),
    )
    return make_data(np.ones((n, 1)), d, np.zeros(n), truth=truth)


def test_overlap_interior_passes():
    report = check_overlap(overlap_data([0.5] * 10), phi=0.1)
    assert report.passed and report.fraction_outside == 0.0


def test_overlap_single_violation():
    report = check_overlap(overlap_data([0.5] * 9 + [0.99]), phi=0.05)
    assert not report.passed
    assert report.fraction_outside == pytest.approx(1 / 10)


def test_overlap_requires_propensities():
    data = make_data([[1.0], [1.0]], [1, 0], [0.0, 0.0])
    with pytest.raises(MissingPropensityError):
        check_overlap(data, phi=0.1)


def test_overlap_on_logistic_model_reports_fraction():
    # direct evaluation of the logistic assignment model; no pass value asserted
    rng = np.random.default_rng(11)
    n, p = 500, 10
    x = np.hstack([np.ones((n, 1)), rng.standard_normal((n, p - 1))])
    theta = rng.uniform(-1, 1, p)
    prop = 1.0 / (1.0 + np.exp(-(x @ theta) + rng.standard_normal(n)))
    frac_oracle = np.mean((prop <= 0.1) | (prop >= 0.9))
    d = (rng.uniform(size=n) < prop).astype(int)
    report = check_overlap(make_data(x, d, np.zeros(n)), phi=0.1, propensities=prop)
    assert report.fraction_outside == pytest.approx(frac_oracle)


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    x = rng.standard_normal((12, 4))
    d = np.array([1, 0] * 6)
    y = rng.standard_normal(12)
    data = make_data(x, d, y)
    path = tmp_path / "data.csv"
    save_csv(data, path)
    back = load_csv(path)
    np.testing.assert_array_equal(back.covariates, data.covariates)
    np.testing.assert_array_equal(back.treatments, data.treatments)
    np.testing.assert_array_equal(back.outcomes, data.outcomes)


def test_csv_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(CsvParseError):
        load_csv(path)


def test_truth_sidecar_round_trip(tmp_path):
    truth = GroundTruth(
        beta1=CoefVector(np.array([1.5, 0.0]), role="arm1"),
        beta0=CoefVector(np.array([-0.5, 0.0]), role="arm0"),
        s0=1,
        propensities=np.array([0.25, 0.75]),
    )
    path = tmp_path / "truth.json"
    save_truth_json(truth, path)
    back = load_truth_json(path)
    np.testing.assert_array_equal(back.beta1.values, truth.beta1.values)
    np.testing.assert_array_equal(back.beta0.values, truth.beta0.values)
    np.testing.assert_array_equal(back.propensities, truth.propensities)
    assert back.s0 == 1


def test_containers_are_immutable():
    data = make_data([[1.0], [2.0]], [1, 0], [0.0, 1.0])
    with pytest.raises(ValueError):
        data.covariates[0, 0] = 9.0
