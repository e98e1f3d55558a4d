import numpy as np
import pytest

from chi.dataset import EPS_NORM
from chi.model import score
from chi.synth import SynthSpec, generate


def test_zero_noise_observed_is_model_score():
    ds, truth = generate(SynthSpec(n_cvs=4, n_rows=60, seed=3))
    np.testing.assert_array_equal(ds.observed, score(ds, truth).H)


def test_same_seed_same_data():
    a, ta = generate(SynthSpec(seed=5, noise_sigma=0.02))
    b, tb = generate(SynthSpec(seed=5, noise_sigma=0.02))
    np.testing.assert_array_equal(a.values, b.values)
    np.testing.assert_array_equal(a.observed, b.observed)
    assert ta.to_dict() == tb.to_dict()


def test_endpoint_scores_one():
    ds, truth = generate(SynthSpec(n_cvs=1, n_rows=5, shapes=["monotonic"], eta_range=(3.0, 3.0)))
    assert truth.curves[0].eta == 3.0
    assert score({"cv1": 1.0}, truth).H[0] == 1.0


def test_dead_cvs_are_unimportant():
    ds, truth = generate(SynthSpec(n_cvs=2, dead_cvs=2, n_rows=30))
    assert ds.columns == ("cv1", "cv2", "dead1", "dead2")
    assert [c.role for c in truth.schema.cvs][-2:] == ["unimportant", "unimportant"]
    assert truth.cv_names == ["cv1", "cv2"]


def test_noise_is_clipped():
    ds, _ = generate(SynthSpec(n_rows=500, noise_sigma=0.5, seed=1))
    assert ds.observed.min() >= EPS_NORM and ds.observed.max() <= 1.0


def test_bad_spec():
    with pytest.raises(ValueError):
        SynthSpec(noise_sigma=-1)
    with pytest.raises(ValueError):
        SynthSpec(n_cvs=2, shapes=["monotonic"])
