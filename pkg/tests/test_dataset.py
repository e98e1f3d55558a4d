import math

import numpy as np
import pytest

from chi.dataset import (EPS_NORM, ConfigDataset, apply_transform, denormalize, drop_zero_observed,
                         fill_missing, fit_stats, load_csv, normalize, prepare, write_csv)
from chi.errors import DatasetError
from chi.schema import CvSchema, CvSpec


def test_load_csv_defaults_to_last_column(csv_file):
    ds = load_csv(csv_file("a,b,perf\n1,2,0.5\n3,4,0.7\n"))
    assert ds.columns == ("a", "b")
    assert ds.target == "perf"
    np.testing.assert_array_equal(ds.observed, [0.5, 0.7])
    np.testing.assert_array_equal(ds.values, [[1, 2], [3, 4]])


def test_load_csv_named_target_and_comments(csv_file):
    ds = load_csv(csv_file("# note\nperf,a\n0.5,1\n# mid\n0.6,2\n"), "perf")
    assert ds.columns == ("a",)
    np.testing.assert_array_equal(ds.observed, [0.5, 0.6])


def test_load_csv_missing_cells_are_nan(csv_file):
    ds = load_csv(csv_file("a,b,perf\n1,,0.5\n,4,0.7\n"))
    assert ds.missing_mask().tolist() == [[False, True], [True, False]]


@pytest.mark.parametrize("text, fragment", [
    ("a,b,perf\n1,2\n", "row 1: expected 3 fields"),
    ("a,a,perf\n1,2,3\n", "duplicate"),
    ("a,perf\n1,fast\n", "non-numeric observed"),
    ("a,perf\nx,1\n", "non-numeric value"),
    ("a,perf\n", "no data rows"),
])
def test_load_csv_errors(csv_file, text, fragment):
    with pytest.raises(DatasetError, match=fragment):
        load_csv(csv_file(text))


def test_unknown_target(csv_file):
    with pytest.raises(DatasetError, match="not in header"):
        load_csv(csv_file("a,perf\n1,2\n"), "speed")


def test_values_are_read_only():
    ds = ConfigDataset(("a",), [[1.0]], [0.5])
    with pytest.raises(ValueError):
        ds.values[0, 0] = 2.0


def test_csv_round_trip(tmp_path, csv_file):
    src = csv_file("a,b,perf\n1.25,2,0.5\n3,4.5,0.75\n")
    ds = load_csv(src)
    out = tmp_path / "out.csv"
    write_csv(ds, out)
    back = load_csv(out)
    np.testing.assert_array_equal(back.values, ds.values)
    np.testing.assert_array_equal(back.observed, ds.observed)


def test_drop_zero_observed():
    ds = ConfigDataset(("a",), [[1.0], [2.0], [3.0]], [0.0, 0.4, 0.0])
    kept = drop_zero_observed(ds)
    assert kept.n_rows == 1 and kept.values[0, 0] == 2.0
    with pytest.raises(DatasetError):
        drop_zero_observed(ConfigDataset(("a",), [[1.0]], [0.0]))


def test_fill_missing_median_and_constant():
    ds = ConfigDataset(("a",), [[1.0], [math.nan], [3.0], [10.0]], [1, 1, 1, 1])
    med = fill_missing(ds)
    assert med.values[1, 0] == 3.0
    assert med.fill_values == {"a": 3.0}
    const = fill_missing(ds, "constant", value=-1.0)
    assert const.values[1, 0] == -1.0


def test_log1p_transform_and_negative_rejected():
    schema = CvSchema((CvSpec("a", transform="log1p"),))
    ds = ConfigDataset(("a",), [[0.0], [1000.0]], [1, 1])
    out = apply_transform(ds, schema)
    # ln(1001) = 6.908754779315220585 (mpmath, 30 digits)
    assert out.values[1, 0] == pytest.approx(6.908754779315221, rel=1e-15)
    assert out.values[1, 0] == pytest.approx(6.90876, abs=1e-5)
    with pytest.raises(DatasetError, match="already applied"):
        apply_transform(out, schema)
    with pytest.raises(DatasetError, match="row 2, column 'a'"):
        apply_transform(ConfigDataset(("a",), [[1.0], [-2.0]], [1, 1]), schema)


def test_normalize_maps_bounds_to_eps_and_one():
    ds = ConfigDataset(("a",), [[10.0], [20.0], [30.0]], [1.0, 2.0, 3.0])
    stats = fit_stats(ds)
    norm = normalize(ds, stats)
    np.testing.assert_allclose(norm.values[:, 0], [EPS_NORM, 0.5005, 1.0], rtol=0, atol=1e-15)
    np.testing.assert_allclose(norm.observed, [EPS_NORM, 0.5005, 1.0], atol=1e-15)
    back = denormalize(norm, stats)
    np.testing.assert_allclose(back.values, ds.values, rtol=1e-12)


def test_normalize_clamps_out_of_range_and_constant_columns():
    train = ConfigDataset(("a", "c"), [[0.0, 5.0], [10.0, 5.0]], [0.0, 1.0])
    stats = fit_stats(train)
    assert stats.constant_columns == ["c"]
    test = ConfigDataset(("a", "c"), [[-5.0, 5.0], [20.0, 7.0]], [0.5, 0.5])
    norm = normalize(test, stats)
    assert norm.values[:, 0].tolist() == [EPS_NORM, 1.0]
    assert norm.values[:, 1].tolist() == [1.0, 1.0]


def test_schema_bounds_override_data_range():
    schema = CvSchema((CvSpec("a", 0.0, 100.0),))
    ds = ConfigDataset(("a",), [[25.0], [50.0]], [1.0, 2.0])
    norm, stats = prepare(ds, schema)
    assert stats["a"].raw_min == 0.0 and stats["a"].raw_max == 100.0
    np.testing.assert_allclose(norm.values[:, 0], EPS_NORM + (1 - EPS_NORM) * np.array([0.25, 0.5]))


def test_prepare_reuses_frozen_stats():
    schema = CvSchema((CvSpec("a"),))
    train = ConfigDataset(("a",), [[0.0], [10.0]], [0.0, 1.0])
    _, stats = prepare(train, schema)
    test = ConfigDataset(("a",), [[5.0], [math.nan]], [0.5, 0.5])
    norm, same = prepare(test, schema, stats)
    assert same is stats
    assert norm.normalized and not np.isnan(norm.values).any()
