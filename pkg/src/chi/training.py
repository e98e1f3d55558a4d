"""Batch gradient descent for curve parameters.

Learnable parameters per participating CV: the growth rate ``eta``; for
unimodal curves the decay fraction ``gamma`` and the mode (refreshed by grid
search, not by gradient); for weak dependents the offset ``r``.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels
from .dataset import ConfigDataset, NormStats, prepare
from .errors import ContractError, TrainingError
from .model import (EPS_H, ETA_HI, ETA_LO, ETA_SMALL, GAMMA_HI, CvCurve, HealthModel,
                    build_plan)
from .schema import CvSchema

log = logging.getLogger(__name__)

MODE_REFRESH_EVERY = 25
DIVERGENCE_FACTOR = 10.0
DIVERGENCE_PATIENCE = 10


@dataclass(frozen=True)
class TrainOptions:
    alpha: float = 0.5
    max_epochs: int = 500
    target_mse: float | None = None
    objective: str = "plain"
    seed: int = 0
    mode_grid: int = 9
    eta_lo: float = ETA_LO
    eta_hi: float = ETA_HI
    gamma_hi: float = GAMMA_HI
    eps_h: float = EPS_H
    # "sum": step along the sum of per-row squared-error gradients (N * grad MSE);
    # "mean": step along grad MSE itself.
    grad_reduction: str = "sum"

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ContractError(f"alpha must be positive, got {self.alpha}")
        if self.max_epochs < 1:
            raise ContractError("max_epochs must be >= 1")
        if self.mode_grid < 3:
            raise ContractError("mode_grid must be >= 3")
        if self.objective not in ("plain", "log"):
            raise ContractError(f"objective must be 'plain' or 'log', got {self.objective!r}")
        if self.grad_reduction not in ("sum", "mean"):
            raise ContractError(f"grad_reduction must be 'sum' or 'mean', got {self.grad_reduction!r}")


@dataclass
class TrainTrace:
    mse: list[float] = field(default_factory=list)
    max_grad: list[float] = field(default_factory=list)
    final_params: dict[str, float] = field(default_factory=dict)
    best_mse: float = math.inf
    best_epoch: int = 0
    duration_s: float = 0.0

    def __len__(self) -> int:
        return len(self.mse)

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "mse", "max_grad"])
            for i, (m, g) in enumerate(zip(self.mse, self.max_grad), start=1):
                w.writerow([i, f"{m:.6f}", f"{g:.6f}"])


def mse(H: Sequence[float] | np.ndarray, O: Sequence[float] | np.ndarray, objective: str = "plain") -> float:
    H = np.asarray(H, dtype=np.float64)
    O = np.asarray(O, dtype=np.float64)
    if H.shape != O.shape or H.size == 0:
        raise ContractError(f"mse needs equal non-empty lengths, got {H.shape} and {O.shape}")
    if objective == "log":
        if np.any(H <= 0) or np.any(O <= 0):
            raise ContractError("log objective needs positive H and O")
        d = np.log(H) - np.log(O)
    elif objective == "plain":
        d = H - O
    else:
        raise ContractError(f"unknown objective {objective!r}")
    return float(np.mean(d * d))


def grad_eta(s: float, eta: float) -> float:
    """Partial derivative of the saturating curve with respect to eta."""
    if abs(eta) < ETA_SMALL:
        return 0.5 * s * (1.0 - s)
    denom = -math.expm1(-eta)
    num = -math.expm1(-eta * s)
    return (s * math.exp(-eta * s) * denom - num * math.exp(-eta)) / (denom * denom)


def grad_gamma(s_f: float) -> float:
    """Partial derivative of the falling branch 1 - gamma*s_f with respect to gamma."""
    return -s_f


@dataclass(frozen=True)
class Gradient:
    cvs: tuple[str, ...]
    eta: np.ndarray
    gamma: np.ndarray
    r: np.ndarray
    mse: float
    H: np.ndarray

    def as_dict(self) -> dict[str, float]:
        out = {}
        for i, cv in enumerate(self.cvs):
            out[f"eta[{cv}]"] = float(self.eta[i])
            out[f"gamma[{cv}]"] = float(self.gamma[i])
            out[f"r[{cv}]"] = float(self.r[i])
        return out

    def max_abs(self) -> float:
        return float(max(np.abs(self.eta).max(), np.abs(self.gamma).max(), np.abs(self.r).max()))


def _loss_grad(X, O, plan, eps_h, objective, scale, cvs):
    try:
        return kernels.loss_grad(X, O, plan, eps_h, log_objective=objective == "log", scale=scale)
    except FloatingPointError as exc:
        n, k = exc.args
        raise TrainingError(f"non-finite health value or gradient at row {n}, CV {cvs[k]!r}") from None


def grad_params(ds: ConfigDataset, model: HealthModel, objective: str = "plain",
                reduction: str = "mean") -> Gradient:
    """Gradient of the objective over every learnable parameter.

    ``ds`` must be normalized with the model's statistics. With
    ``reduction='mean'`` this is the exact gradient of the MSE; ``'sum'``
    scales it by N.
    """
    if ds.observed is None:
        raise ContractError("grad_params needs observed values")
    plan = build_plan(model.schema, ds.columns, model.curves, model.weak_offsets)
    scale = 1.0 / ds.n_rows if reduction == "mean" else 1.0
    loss, H, ge, gg, gr = _loss_grad(ds.values, ds.observed, plan, model.eps_h, objective,
                                     scale, model.cv_names)
    return Gradient(tuple(model.cv_names), ge, gg, gr, loss, H)


def initial_model(schema: CvSchema, stats: NormStats, eps_h: float = EPS_H) -> HealthModel:
    """eta=1, gamma=0.1, mode at the middle of the range, offsets 0."""
    eps = stats.eps_norm
    curves = [CvCurve(c.name, c.shape, 1.0, 0.1 if c.shape == "unimodal" else 0.0,
                      0.5 * (eps + 1.0), eps, 1.0) for c in schema.participating]
    offsets = {c.name: 0.0 for c in schema.by_role("weak")}
    return HealthModel(tuple(curves), stats, schema, offsets, eps_h)


def _mode_candidates(lo: float, hi: float, n: int) -> np.ndarray:
    return lo + (hi - lo) * np.arange(1, n + 1) / (n + 1)


def _refresh_modes(X, O, plan, unimodal, eps_h, objective, n_grid):
    for k in unimodal:
        cands = _mode_candidates(plan.lo[k], plan.hi[k], n_grid)
        scores = kernels.mode_scan(X, O, plan, k, cands, eps_h, log_objective=objective == "log")
        plan.mode[k] = cands[int(np.argmin(scores))]


def _clamp(plan, opts, unimodal_mask, weak_mask, radius):
    np.clip(plan.eta, opts.eta_lo, opts.eta_hi, out=plan.eta)
    plan.gamma[:] = np.where(unimodal_mask, np.clip(plan.gamma, 0.0, opts.gamma_hi), 0.0)
    plan.r[:] = np.where(weak_mask, np.clip(plan.r, -radius, radius), 0.0)


def _params(plan, cvs) -> dict[str, float]:
    out = {}
    for k, cv in enumerate(cvs):
        out[f"eta[{cv}]"] = float(plan.eta[k])
        if plan.kind[k]:
            out[f"gamma[{cv}]"] = float(plan.gamma[k])
            out[f"p_mode[{cv}]"] = float(plan.mode[k])
        if plan.weak[k]:
            out[f"r[{cv}]"] = float(plan.r[k])
    return out


def _model_from_plan(base: HealthModel, plan, meta) -> HealthModel:
    curves = []
    offsets = {}
    for k, c in enumerate(base.curves):
        uni = c.shape == "unimodal"
        curves.append(CvCurve(c.cv, c.shape, float(plan.eta[k]),
                              float(plan.gamma[k]) if uni else 0.0,
                              float(plan.mode[k]) if uni else c.p_mode, c.lo, c.hi))
        if plan.weak[k]:
            offsets[c.cv] = float(plan.r[k])
    return base.with_params(curves, offsets, meta)


def fit(ds: ConfigDataset, schema: CvSchema, opts: TrainOptions | None = None,
        stats: NormStats | None = None) -> tuple[HealthModel, TrainTrace]:
    """Fit a health model to ``ds``.

    A raw dataset is filled, transformed and normalized first (statistics
    fitted on it). A dataset that is already normalized must come with the
    ``stats`` used to normalize it.
    """
    opts = opts or TrainOptions()
    if ds.observed is None:
        raise ContractError("fit needs a dataset with an observed column")
    if not ds.normalized:
        ds, stats = prepare(ds, schema, stats)
    elif stats is None:
        raise ContractError("a normalized dataset needs the NormStats used to produce it")

    start = time.perf_counter()
    base = initial_model(schema, stats, opts.eps_h)
    cvs = base.cv_names
    plan = build_plan(schema, ds.columns, base.curves, base.weak_offsets)
    X = np.ascontiguousarray(ds.values)
    O = np.ascontiguousarray(ds.observed)
    n = X.shape[0]
    scale = 1.0 if opts.grad_reduction == "sum" else 1.0 / n
    unimodal = [k for k in range(len(cvs)) if plan.kind[k]]
    unimodal_mask = plan.kind.astype(bool)
    weak_mask = plan.weak.astype(bool)
    radius = np.array([schema[c].R if weak_mask[k] else 0.0 for k, c in enumerate(cvs)])

    trace = TrainTrace()
    best_plan = plan.copy()
    initial = None
    bad_streak = 0
    for epoch in range(1, opts.max_epochs + 1):
        if unimodal and epoch % MODE_REFRESH_EVERY == 0:
            _refresh_modes(X, O, plan, unimodal, opts.eps_h, opts.objective, opts.mode_grid)
        loss, _, ge, gg, gr = _loss_grad(X, O, plan, opts.eps_h, opts.objective, scale, cvs)
        if not math.isfinite(loss):
            raise TrainingError(f"objective became non-finite at epoch {epoch}")
        trace.mse.append(loss)
        trace.max_grad.append(float(max(np.abs(ge).max(), np.abs(gg).max(), np.abs(gr).max())))
        if loss < trace.best_mse:
            trace.best_mse, trace.best_epoch = loss, epoch
            best_plan = plan.copy()
        if initial is None:
            initial = loss
        if opts.target_mse is not None and loss <= opts.target_mse:
            break
        bad_streak = bad_streak + 1 if loss > DIVERGENCE_FACTOR * initial else 0
        if bad_streak >= DIVERGENCE_PATIENCE:
            raise TrainingError(
                f"training diverged (MSE {loss:.4g} vs initial {initial:.4g}); try a smaller alpha")
        plan.eta -= opts.alpha * ge
        plan.gamma -= opts.alpha * gg
        plan.r -= opts.alpha * gr
        _clamp(plan, opts, unimodal_mask, weak_mask, radius)
    else:
        # the last update has not been scored yet
        loss, _, _, _, _ = _loss_grad(X, O, plan, opts.eps_h, opts.objective, scale, cvs)
        if loss < trace.best_mse:
            trace.best_mse = loss
            trace.best_epoch = len(trace.mse) + 1
            best_plan = plan.copy()

    trace.final_params = _params(best_plan, cvs)
    trace.duration_s = time.perf_counter() - start
    meta = {"epochs": len(trace.mse), "final_mse": trace.best_mse, "seed": opts.seed,
            "objective": opts.objective, "alpha": opts.alpha}
    log.debug("fit: %d epochs, best MSE %.6g at epoch %d", len(trace.mse), trace.best_mse, trace.best_epoch)
    return _model_from_plan(base, best_plan, meta), trace


@dataclass
class EvalReport:
    H: np.ndarray
    O: np.ndarray
    mse: float
    variance: float
    objective: str = "plain"
    n_train: int = 0
    n_test: int = 0
    runtime_ms: float = 0.0
    split: str = ""

    @property
    def residuals(self) -> np.ndarray:
        if self.objective == "log":
            return np.log(self.H) - np.log(self.O)
        return self.H - self.O

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["row", "H", "O", "residual"])
            for i, (h, o, r) in enumerate(zip(self.H, self.O, self.residuals)):
                w.writerow([i, f"{h:.6f}", f"{o:.6f}", f"{r:.6f}"])
            fh.write(f"mse={self.mse:.6f} variance={self.variance:.6f}\n")


def evaluate_holdout(model: HealthModel, test: ConfigDataset, objective: str = "plain") -> EvalReport:
    """Score normalized held-out rows and compare with their observed values."""
    if test.n_rows == 0 or test.observed is None:
        raise ContractError("evaluate_holdout needs a non-empty test split with observed values")
    if not test.normalized:
        test, _ = prepare(test, model.schema, model.norm_stats)
    plan = build_plan(model.schema, test.columns, model.curves, model.weak_offsets)
    H, _ = kernels.forward(test.values, plan, model.eps_h)
    O = np.array(test.observed)
    d = np.log(H) - np.log(O) if objective == "log" else H - O
    sq = d * d
    return EvalReport(H, O, float(np.mean(sq)), float(np.var(sq)), objective, n_test=len(O))
