import os
import subprocess
import sys

import numpy as np
import pytest

from chi import kernels
from chi.training import _mode_candidates
from oracles import oracle_H, random_instance

BACKENDS = kernels.available_backends()


def _instances(n=20, seed=7):
    rng = np.random.default_rng(seed)
    return [random_instance(rng, n_rows=40, margin=0.0) for _ in range(n)]


def test_forward_matches_scalar_oracle(backend):
    for ds, model in _instances():
        H, h = kernels.forward(ds.values, model.plan(), model.eps_h, backend)
        np.testing.assert_allclose(H, oracle_H(ds, model), rtol=1e-12)
        assert h.shape == (ds.n_rows, len(model.curves))


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled extension not built")
def test_backends_agree():
    py, cy = kernels.get_backend("python"), kernels.get_backend("cython")
    for ds, model in _instances(30, seed=3):
        plan = model.plan()
        for log_obj in (False, True):
            a = kernels.loss_grad(ds.values, ds.observed, plan, 1e-3, log_objective=log_obj, backend=py)
            b = kernels.loss_grad(ds.values, ds.observed, plan, 1e-3, log_objective=log_obj, backend=cy)
            assert a[0] == pytest.approx(b[0], rel=1e-12)
            for x, y in zip(a[1:], b[1:]):
                np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-15)
        k = len(model.curves) - 1
        cands = _mode_candidates(plan.lo[k], plan.hi[k], 9)
        np.testing.assert_allclose(kernels.mode_scan(ds.values, ds.observed, plan, k, cands, 1e-3, backend=py),
                                   kernels.mode_scan(ds.values, ds.observed, plan, k, cands, 1e-3, backend=cy),
                                   rtol=1e-12)


def test_mode_scan_matches_forward(backend):
    ds, model = _instances(1, seed=11)[0]
    plan = model.plan()
    k = 0
    cands = np.array([0.2, 0.5, 0.8])
    got = kernels.mode_scan(ds.values, ds.observed, plan, k, cands, 1e-3, backend=backend)
    for c, v in zip(cands, got):
        p = plan.copy()
        p.mode[k] = c
        H, _ = kernels.forward(ds.values, p, 1e-3, backend)
        assert v == pytest.approx(np.mean((H - ds.observed) ** 2), rel=1e-12)


def test_floor_leak_scales_gradient(backend):
    plan = kernels.Plan([0], [0], [0], [1.0], [0.0], [2.0], [0.0], [0.5], [0.0], [1.0], [0.0])
    X = np.array([[0.0001]])
    O = np.array([0.5])
    _, H, ge1, _, _ = kernels.loss_grad(X, O, plan, 1e-3, leak=1.0, backend=backend)
    _, _, ge2, _, _ = kernels.loss_grad(X, O, plan, 1e-3, backend=backend)
    assert H[0] == pytest.approx(1e-3, rel=1e-14)
    assert ge2[0] == pytest.approx(kernels.LEAK * ge1[0], rel=1e-12)


def test_non_finite_is_reported(backend):
    plan = kernels.Plan([0], [0], [0], [1.0], [0.0], [2.0], [0.0], [0.5], [0.0], [1.0], [0.0])
    X = np.array([[0.5], [np.nan]])
    with pytest.raises(FloatingPointError) as exc:
        kernels.forward(X, plan, 1e-3, backend)
    assert exc.value.args == (1, 0)


def test_pure_python_switch():
    code = "import chi.kernels as k; print(k.BACKEND)"
    env = dict(os.environ, CHI_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")
