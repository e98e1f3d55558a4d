import numpy as np
import pytest

from chi.dataset import ConfigDataset
from chi.errors import ContractError
from chi.evaluation import SplitSpec, curve_svg, run_experiment, run_seeds, split, split_indices
from chi.model import CvCurve
from chi.synth import SynthSpec, generate
from chi.training import TrainOptions


def test_split_sizes():
    tr, te = split_indices(10, SplitSpec(0.8, 0))
    assert (len(tr), len(te)) == (8, 2)
    tr, te = split_indices(2, SplitSpec(0.5, 0))
    assert (len(tr), len(te)) == (1, 1)
    assert sorted(np.concatenate([tr, te]).tolist()) == [0, 1]


def test_split_is_seeded():
    a = split_indices(50, SplitSpec(0.5, 3))
    b = split_indices(50, SplitSpec(0.5, 3))
    c = split_indices(50, SplitSpec(0.5, 4))
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert not np.array_equal(a[0], c[0])


def test_split_errors():
    with pytest.raises(ContractError):
        split_indices(1, SplitSpec())
    with pytest.raises(ContractError):
        split_indices(3, SplitSpec(0.9))
    with pytest.raises(ContractError):
        SplitSpec(1.0)


def test_split_dataset():
    ds = ConfigDataset(("a",), np.arange(10.0)[:, None], np.arange(10.0))
    tr, te = split(ds, SplitSpec(0.7, 1))
    assert tr.n_rows == 7 and te.n_rows == 3
    np.testing.assert_array_equal(tr.values[:, 0], tr.observed)


def test_zero_noise_experiment_and_artifacts(tmp_path):
    ds, truth = generate(SynthSpec(n_cvs=3, n_rows=120, seed=2))
    exp = run_experiment(ds, truth.schema, TrainOptions(), SplitSpec(0.5, 1), out_dir=tmp_path, name="z")
    assert exp.report.mse <= 1e-3
    assert exp.report.n_train == 60 and exp.report.n_test == 60
    names = sorted(p.name for p in exp.files)
    assert "z_0.5_1.report.csv" in names and "z_0.5_1.model.json" in names and "z_cv1.curve.csv" in names
    text = (tmp_path / "z_0.5_1.report.csv").read_text().splitlines()
    assert text[0] == "row,H,O,residual" and text[-1].startswith("mse=")


def test_run_seeds_median():
    ds, truth = generate(SynthSpec(n_cvs=2, n_rows=60, noise_sigma=0.02, seed=0))
    runs, summary = run_seeds(ds, truth.schema, TrainOptions(max_epochs=50), 0.8, [0, 1, 2])
    assert len(runs) == 3
    assert summary["median_mse"] == sorted(summary["mse"])[1]


def test_curve_svg():
    svg = curve_svg(CvCurve("mem", "unimodal", 2.0, 0.2, 0.6), 1e-3)
    assert svg.startswith("<svg") and "polyline" in svg and "mem" in svg
