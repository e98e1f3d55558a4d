"""Independent reference computations used by the tests.

``oracle_H`` assembles scores from the scalar ``health`` function row by
row. ``oracle_loss`` re-derives the curves in 20-digit mpmath arithmetic so
that finite differences of it are free of double-precision rounding noise.
Neither touches the vectorized kernels.
"""

from __future__ import annotations

import math

import mpmath as mp
import numpy as np

from chi.dataset import EPS_NORM, ColumnStats, ConfigDataset, NormStats
from chi.model import EPS_H, CvCurve, HealthModel, health, saturating
from chi.schema import CvSchema, CvSpec

FD_STEP = 1e-6
mp.mp.dps = 20


def mp_health(p, c: CvCurve, eps_h: float):
    """Curve value in 20-digit arithmetic; mirrors the closed forms directly."""
    p = mp.mpf(p)
    if c.shape == "unimodal" and p > c.p_mode:
        sf = min((p - c.p_mode) / (mp.mpf(c.hi) - c.p_mode), 1)
        h = 1 - mp.mpf(c.gamma) * sf
    else:
        top = mp.mpf(c.p_mode if c.shape == "unimodal" else c.hi)
        s = min(max((p - c.lo) / (top - c.lo), 0), 1)
        eta = mp.mpf(c.eta)
        h = s if abs(eta) < 1e-6 else (1 - mp.exp(-eta * s)) / (1 - mp.exp(-eta))
    return max(mp.mpf(eps_h), h)


def curve_input(row: dict[str, float], spec: CvSpec, offsets: dict[str, float]) -> float:
    if spec.role == "weak":
        return (spec.a * row[spec.parent] + spec.b) * (1.0 + offsets.get(spec.name, 0.0))
    return row[spec.name]


def oracle_H(ds: ConfigDataset, model: HealthModel) -> np.ndarray:
    out = []
    for values in ds.values:
        row = dict(zip(ds.columns, values))
        logs = [math.log(health(curve_input(row, model.schema[c.cv], model.weak_offsets), c, model.eps_h))
                for c in model.curves]
        out.append(math.exp(sum(logs) / len(logs)))
    return np.array(out)


def oracle_loss(ds: ConfigDataset, model: HealthModel):
    """Mean squared error in 20-digit arithmetic (returns an mpf)."""
    return _mp_mse(ds, _mp_logs(ds, model))


def mp_input(row, spec: CvSpec, offsets):
    if spec.role == "weak":
        return (mp.mpf(spec.a) * mp.mpf(row[spec.parent]) + spec.b) * (1 + mp.mpf(offsets.get(spec.name, 0.0)))
    return mp.mpf(row[spec.name])


def raw_health(p: float, c: CvCurve) -> float:
    """Curve value before the floor is applied."""
    if c.shape == "unimodal" and p > c.p_mode:
        return 1.0 - c.gamma * min((p - c.p_mode) / (c.hi - c.p_mode), 1.0)
    top = c.p_mode if c.shape == "unimodal" else c.hi
    return saturating(min(max((p - c.lo) / (top - c.lo), 0.0), 1.0), c.eta)


def identity_stats(columns, eps=EPS_NORM) -> NormStats:
    return NormStats(tuple(ColumnStats(c, eps, 1.0) for c in columns), ColumnStats("perf", eps, 1.0), eps)


def random_instance(rng: np.random.Generator, n_rows: int = 16, margin: float = 5e-3):
    """A normalized dataset and model, with rows near kinks removed.

    Rows are dropped when a curve input sits within ``margin`` of a unimodal
    mode or when a raw health value is near the floor; both are points where
    the objective is not differentiable.
    """
    n_dom = int(rng.integers(1, 5))
    specs = []
    for i in range(n_dom):
        specs.append(CvSpec(f"x{i}", EPS_NORM, 1.0, str(rng.choice(["monotonic", "unimodal"]))))
    n_weak = int(rng.integers(0, 3))
    for i in range(n_weak):
        specs.append(CvSpec(f"w{i}", EPS_NORM, 1.0, str(rng.choice(["monotonic", "unimodal"])),
                            role="weak", parent=f"x{int(rng.integers(0, n_dom))}",
                            a=float(rng.uniform(0.3, 0.7)), b=float(rng.uniform(0.05, 0.2)), R=0.2))
    schema = CvSchema(tuple(specs))
    columns = [s.name for s in specs]
    curves = []
    for s in specs:
        curves.append(CvCurve(s.name, s.shape, float(rng.uniform(0.2, 6.0)),
                              float(rng.uniform(0.05, 0.6)) if s.shape == "unimodal" else 0.0,
                              float(rng.uniform(0.3, 0.8)), EPS_NORM, 1.0))
    offsets = {s.name: float(rng.uniform(-0.15, 0.15)) for s in specs if s.role == "weak"}
    model = HealthModel(tuple(curves), identity_stats(columns), schema, offsets, EPS_H)

    X = rng.uniform(0.02, 1.0, size=(n_rows * 3, len(columns)))
    keep = []
    for i, values in enumerate(X):
        row = dict(zip(columns, values))
        ok = True
        for c in curves:
            p = curve_input(row, schema[c.cv], offsets)
            if c.shape == "unimodal" and abs(p - c.p_mode) < margin:
                ok = False
            if raw_health(p, c) < 3 * EPS_H or p >= 1.0 - margin:
                ok = False
        if ok:
            keep.append(i)
    X = X[keep[:n_rows]]
    O = rng.uniform(0.05, 1.0, size=X.shape[0])
    ds = ConfigDataset(tuple(columns), X, O, "perf", normalized=True, transformed=True)
    return ds, model


def perturbed(model: HealthModel, kind: str, cv: str, delta: float) -> HealthModel:
    curves = list(model.curves)
    offsets = dict(model.weak_offsets)
    if kind == "r":
        offsets[cv] += delta
    else:
        i = model.cv_names.index(cv)
        c = curves[i]
        attr = "eta" if kind == "eta" else "gamma"
        curves[i] = CvCurve(c.cv, c.shape, c.eta + (delta if attr == "eta" else 0.0),
                            c.gamma + (delta if attr == "gamma" else 0.0), c.p_mode, c.lo, c.hi)
    return model.with_params(curves, offsets)


def _param(model: HealthModel, kind: str, cv: str) -> float:
    if kind == "r":
        return model.weak_offsets[cv]
    return getattr(model.curve(cv), kind)


def _mp_logs(ds: ConfigDataset, model: HealthModel, only: str | None = None):
    out = []
    for values in ds.values:
        row = dict(zip(ds.columns, values))
        out.append({c.cv: mp.log(mp_health(mp_input(row, model.schema[c.cv], model.weak_offsets), c, model.eps_h))
                    for c in model.curves if only is None or c.cv == only})
    return out


def _mp_mse(ds: ConfigDataset, logs) -> mp.mpf:
    total = mp.mpf(0)
    for row_logs, o in zip(logs, ds.observed):
        d = mp.exp(mp.fsum(row_logs.values()) / len(row_logs)) - mp.mpf(o)
        total += d * d
    return total / len(logs)


def finite_difference(ds, model, kind: str, cv: str, step: float = FD_STEP, base_logs=None) -> float:
    """Central difference of ``oracle_loss``; divides by the step actually realized in doubles.

    Only the perturbed curve is re-evaluated; ``base_logs`` (from ``_mp_logs``)
    may be passed in to share the other curves' values across calls.
    """
    base = base_logs if base_logs is not None else _mp_logs(ds, model)
    m_up, m_down = perturbed(model, kind, cv, step), perturbed(model, kind, cv, -step)
    losses = []
    for m in (m_up, m_down):
        logs = [{**b, **n} for b, n in zip(base, _mp_logs(ds, m, only=cv))]
        losses.append(_mp_mse(ds, logs))
    width = mp.mpf(_param(m_up, kind, cv)) - mp.mpf(_param(m_down, kind, cv))
    return float((losses[0] - losses[1]) / width)


def fd_gradient(ds, model) -> dict[str, float]:
    """Finite-difference gradient over every learnable parameter."""
    base = _mp_logs(ds, model)
    return {f"{kind}[{cv}]": finite_difference(ds, model, kind, cv, base_logs=base)
            for kind, cv in learnable(model)}


def learnable(model: HealthModel) -> list[tuple[str, str]]:
    out = []
    for c in model.curves:
        out.append(("eta", c.cv))
        if c.shape == "unimodal":
            out.append(("gamma", c.cv))
        if c.cv in model.weak_offsets:
            out.append(("r", c.cv))
    return out


def rel_err(a: float, b: float, floor: float = 1e-8) -> float:
    return abs(a - b) / max(abs(a), abs(b), floor)
