"""Health curves, geometric-mean aggregation, scoring and model files."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .dataset import EPS_NORM, ConfigDataset, NormStats, prepare
from .errors import ContractError, ModelFormatError, SchemaError
from .schema import CvSchema

FORMAT_VERSION = "chi-model/1"
EPS_H = 1e-3
ETA_LO, ETA_HI = 0.01, 50.0
GAMMA_HI = 0.999
ETA_SMALL = 1e-6


@dataclass(frozen=True)
class CvCurve:
    """One CV's health curve in normalized units.

    ``lo`` and ``hi`` are the normalized images of the expert bounds; the
    curve input is clipped to them. ``p_mode`` and ``gamma`` only matter for
    unimodal curves.
    """

    cv: str
    shape: str = "monotonic"
    eta: float = 1.0
    gamma: float = 0.1
    p_mode: float = 0.5
    lo: float = EPS_NORM
    hi: float = 1.0

    def __post_init__(self) -> None:
        for name in ("eta", "gamma", "p_mode", "lo", "hi"):
            if math.isnan(getattr(self, name)):
                raise ContractError(f"{self.cv}: parameter {name} is NaN")
        if not self.lo < self.hi:
            raise ContractError(f"{self.cv}: curve bounds need lo < hi")
        if self.shape == "unimodal" and not self.lo < self.p_mode < self.hi:
            raise ContractError(f"{self.cv}: p_mode {self.p_mode} not inside ({self.lo}, {self.hi})")
        if self.shape == "unimodal" and not 0.0 <= self.gamma < 1.0:
            raise ContractError(f"{self.cv}: gamma {self.gamma} outside [0, 1)")

    def to_dict(self) -> dict:
        return {"cv": self.cv, "shape": self.shape, "eta": self.eta, "gamma": self.gamma,
                "p_mode": self.p_mode, "lo": self.lo, "hi": self.hi}

    @classmethod
    def from_dict(cls, d: Mapping) -> CvCurve:
        for key in ("cv", "shape", "eta", "gamma", "p_mode"):
            if key not in d:
                raise ModelFormatError(f"curve entry missing key {key!r}")
        return cls(d["cv"], d["shape"], float(d["eta"]), float(d["gamma"]), float(d["p_mode"]),
                   float(d.get("lo", EPS_NORM)), float(d.get("hi", 1.0)))


def saturating(s: float, eta: float) -> float:
    """(1 - e^(-eta*s)) / (1 - e^(-eta)), with the eta -> 0 limit s."""
    if abs(eta) < ETA_SMALL:
        return s
    return math.expm1(-eta * s) / math.expm1(-eta)


def health(p_norm: float, curve: CvCurve, eps_h: float = EPS_H) -> float:
    """Health of one CV value, floored at ``eps_h``."""
    if math.isnan(p_norm) or p_norm < -1e-9 or p_norm > 1.0 + 1e-9:
        raise ContractError(f"{curve.cv}: normalized value {p_norm} outside [0, 1]")
    p = p_norm
    if curve.shape == "unimodal" and p > curve.p_mode:
        s_f = min((p - curve.p_mode) / (curve.hi - curve.p_mode), 1.0)
        h = 1.0 - curve.gamma * s_f
    else:
        top = curve.p_mode if curve.shape == "unimodal" else curve.hi
        s = min(max((p - curve.lo) / (top - curve.lo), 0.0), 1.0)
        h = saturating(s, curve.eta)
    return max(eps_h, h)


def aggregate(h_values: Sequence[float] | np.ndarray) -> float:
    """Geometric mean, computed as exp(mean(log h))."""
    h = np.asarray(h_values, dtype=np.float64).reshape(-1)
    if h.size == 0:
        raise ContractError("aggregate needs at least one health value")
    if np.any(~(h > 0.0)):
        raise ContractError("health values must be positive")
    return math.exp(math.fsum(math.log(v) for v in h) / h.size)


def curve_samples(curve: CvCurve, n_points: int = 101, eps_h: float = EPS_H) -> list[tuple[float, float]]:
    """Evenly spaced (p_norm, h) pairs over [0, 1]; unimodal curves include p_mode."""
    if n_points < 2:
        raise ContractError("curve_samples needs n_points >= 2")
    grid = [i / (n_points - 1) for i in range(n_points)]
    if curve.shape == "unimodal" and curve.p_mode not in grid:
        grid.append(curve.p_mode)
        grid.sort()
    return [(p, health(p, curve, eps_h)) for p in grid]


@dataclass(frozen=True)
class HealthModel:
    """Learned curves plus everything needed to score raw configurations."""

    curves: tuple[CvCurve, ...]
    norm_stats: NormStats
    schema: CvSchema
    weak_offsets: dict[str, float] = field(default_factory=dict)
    eps_h: float = EPS_H
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0.0 < self.eps_h < 1.0:
            raise ContractError(f"eps_h must lie in (0, 1), got {self.eps_h}")
        expected = [c.name for c in self.schema.participating]
        got = [c.cv for c in self.curves]
        if expected != got:
            raise ContractError(f"curves {got} do not match participating CVs {expected}")

    @property
    def cv_names(self) -> list[str]:
        return [c.cv for c in self.curves]

    def curve(self, name: str) -> CvCurve:
        for c in self.curves:
            if c.cv == name:
                return c
        raise KeyError(name)

    def plan(self) -> kernels.Plan:
        return build_plan(self.schema, self.norm_stats.names, self.curves, self.weak_offsets)

    def with_params(self, curves: Sequence[CvCurve], weak_offsets: Mapping[str, float],
                    meta: dict | None = None) -> HealthModel:
        return replace(self, curves=tuple(curves), weak_offsets=dict(weak_offsets),
                       meta=self.meta if meta is None else meta)

    def to_dict(self) -> dict:
        return {
            "version": FORMAT_VERSION,
            "eps_h": self.eps_h,
            "norm_stats": self.norm_stats.to_dict(),
            "curves": [c.to_dict() for c in self.curves],
            "weak_offsets": dict(self.weak_offsets),
            "schema": self.schema.to_dict(),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> HealthModel:
        for key in ("version", "norm_stats", "curves", "weak_offsets", "meta"):
            if key not in data:
                raise ModelFormatError(f"model file missing key {key!r}")
        if data["version"] != FORMAT_VERSION:
            raise ModelFormatError(f"unsupported model version {data['version']!r}, expected {FORMAT_VERSION!r}")
        curves = tuple(CvCurve.from_dict(c) for c in data["curves"])
        try:
            stats = NormStats.from_dict(data["norm_stats"])
        except KeyError as exc:
            raise ModelFormatError(f"norm_stats missing key {exc.args[0]!r}") from None
        if "schema" in data:
            schema = CvSchema.from_dict(data["schema"])
        else:
            from .schema import CvSpec
            schema = CvSchema(tuple(CvSpec(c.cv, shape=c.shape) for c in curves))
        return cls(curves, stats, schema, {k: float(v) for k, v in data["weak_offsets"].items()},
                   float(data.get("eps_h", EPS_H)), dict(data["meta"]))


def build_plan(schema: CvSchema, columns: Sequence[str], curves: Sequence[CvCurve],
               weak_offsets: Mapping[str, float]) -> kernels.Plan:
    columns = list(columns)
    by_name = {c.cv: c for c in curves}
    col, kind, weak, a, b, eta, gamma, mode, lo, hi, r = ([] for _ in range(11))
    for spec in schema.participating:
        c = by_name[spec.name]
        src = spec.parent if spec.role == "weak" else spec.name
        if src not in columns:
            raise SchemaError(f"column {src!r} needed by {spec.name!r} is not in the data")
        col.append(columns.index(src))
        kind.append(1 if c.shape == "unimodal" else 0)
        weak.append(1 if spec.role == "weak" else 0)
        a.append(spec.a if spec.role == "weak" else 1.0)
        b.append(spec.b if spec.role == "weak" else 0.0)
        eta.append(c.eta)
        gamma.append(c.gamma if c.shape == "unimodal" else 0.0)
        mode.append(c.p_mode if c.shape == "unimodal" else 0.5 * (c.lo + c.hi))
        lo.append(c.lo)
        hi.append(c.hi)
        r.append(weak_offsets.get(spec.name, 0.0) if spec.role == "weak" else 0.0)
    return kernels.Plan(col, kind, weak, a, b, eta, gamma, mode, lo, hi, r)


def save_model(model: HealthModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=2) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> HealthModel:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ModelFormatError(f"cannot read model {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model {path} is not valid JSON: {exc}") from exc
    return HealthModel.from_dict(data)


@dataclass(frozen=True)
class Scores:
    H: np.ndarray
    breakdown: np.ndarray
    cvs: tuple[str, ...]

    def row(self, i: int) -> tuple[float, dict[str, float]]:
        return float(self.H[i]), dict(zip(self.cvs, map(float, self.breakdown[i])))


def _as_dataset(rows, model: HealthModel) -> ConfigDataset:
    columns = model.norm_stats.names
    if isinstance(rows, Mapping):
        unknown = [k for k in rows if k not in columns]
        if unknown:
            raise SchemaError(f"unknown CV column(s): {unknown}")
        values = [[float(rows[c]) if c in rows else math.nan for c in columns]]
        return ConfigDataset(columns, np.array(values))
    ds: ConfigDataset = rows
    unknown = [c for c in ds.columns if c not in columns]
    if unknown:
        raise SchemaError(f"unknown CV column(s): {unknown}")
    if tuple(ds.columns) == tuple(columns):
        return ds
    values = np.full((ds.n_rows, len(columns)), math.nan)
    for j, c in enumerate(columns):
        if c in ds.columns:
            values[:, j] = ds.column(c)
    return ConfigDataset(columns, values, ds.observed, ds.target, ds.source_id)


def score(rows: ConfigDataset | Mapping[str, float], model: HealthModel) -> Scores:
    """Score raw configurations with a trained model.

    ``rows`` is a raw dataset (an observed column, if any, is ignored) or a
    single configuration as a name -> value mapping. Columns the model knows
    but the input lacks are filled with the training fill values.
    """
    ds = _as_dataset(rows, model)
    norm, _ = prepare(ds, model.schema, model.norm_stats)
    return score_normalized(norm.values, model)


def score_normalized(X: np.ndarray, model: HealthModel) -> Scores:
    H, h = kernels.forward(X, model.plan(), model.eps_h)
    return Scores(H, h, tuple(model.cv_names))


def influence(curve: CvCurve, eps_h: float = EPS_H, eps_norm: float = EPS_NORM) -> float:
    """Spread of the curve across the normalized range, h(1) - h(eps_norm)."""
    return health(1.0, curve, eps_h) - health(eps_norm, curve, eps_h)
