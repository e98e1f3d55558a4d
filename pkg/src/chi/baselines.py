"""Comparison regressors: OLS and a forward-pass hinge model (MARS-lite)."""

from __future__ import annotations

import csv
import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ContractError

log = logging.getLogger(__name__)

JITTER = 1e-8
KNOT_QUANTILES = tuple(q / 10 for q in range(1, 10))
NEAR_ZERO = 1e-6


@dataclass(frozen=True)
class LinearModel:
    beta: np.ndarray  # intercept first

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return self.beta[0] + X @ self.beta[1:]

    def influence(self, lo: float = 1e-3, hi: float = 1.0) -> np.ndarray:
        return np.abs(self.beta[1:]) * (hi - lo)


def _design(X: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(X.shape[0]), X])


def _solve_normal(A: np.ndarray, y: np.ndarray) -> np.ndarray:
    gram = A.T @ A
    gram[np.diag_indices_from(gram)] += JITTER
    try:
        beta = np.linalg.solve(gram, A.T @ y)
    except np.linalg.LinAlgError as exc:
        raise ContractError(f"normal equations are singular: {exc}") from None
    if not np.all(np.isfinite(beta)):
        raise ContractError("normal equations produced non-finite coefficients")
    return beta


def ols_fit(X, Y) -> LinearModel:
    """Least squares via the normal equations with a 1e-8 diagonal jitter."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n, m = X.shape
    if n < m + 1:
        log.warning("ols_fit: %d rows for %d coefficients", n, m + 1)
    return LinearModel(_solve_normal(_design(X), Y))


@dataclass(frozen=True)
class HingeTerm:
    cv: int
    knot: float
    sign: int  # +1: max(0, x - K); -1: max(0, K - x)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        x = X[:, self.cv]
        return np.maximum(0.0, self.sign * (x - self.knot))


@dataclass(frozen=True)
class HingeModel:
    terms: tuple[HingeTerm, ...]
    coef: np.ndarray  # intercept first
    train_mse_path: tuple[float, ...] = field(default=())

    def basis(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        cols = [np.ones(X.shape[0])] + [t(X) for t in self.terms]
        return np.column_stack(cols)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.basis(X) @ self.coef

    def influence(self, n_cvs: int, lo: float = 1e-3, hi: float = 1.0, n_grid: int = 101) -> np.ndarray:
        """Range of each CV's additive contribution over [lo, hi]."""
        grid = np.linspace(lo, hi, n_grid)
        out = np.zeros(n_cvs)
        for m in range(n_cvs):
            contrib = np.zeros(n_grid)
            for t, c in zip(self.terms, self.coef[1:]):
                if t.cv == m:
                    contrib += c * np.maximum(0.0, t.sign * (grid - t.knot))
            out[m] = contrib.max() - contrib.min()
        return out


def _mse_of(basis: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    coef = _solve_normal(basis, y)
    r = y - basis @ coef
    return float(np.dot(r, r) / len(y)), coef


def hinge_fit(X, Y, max_terms: int = 10, min_improvement: float = 1e-6) -> HingeModel:
    """Greedy forward selection of mirrored hinge pairs.

    Each step tries every (cv, knot) with knots at the 10%..90% quantiles of
    that CV and adds the pair max(0, x-K), max(0, K-x) whose least-squares
    refit lowers training MSE the most. When only one slot remains, the
    better single hinge is added. No backward pruning, no interactions.
    """
    if max_terms < 1:
        raise ContractError("max_terms must be >= 1")
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n, m = X.shape
    basis = np.ones((n, 1))
    current, coef = _mse_of(basis, Y)
    terms: list[HingeTerm] = []
    path = [current]
    used: set[tuple[int, float]] = set()
    knots = [np.unique(np.quantile(X[:, j], KNOT_QUANTILES)) for j in range(m)]

    while len(terms) < max_terms:
        room = max_terms - len(terms)
        best = None
        for j in range(m):
            for knot in knots[j]:
                key = (j, float(knot))
                if key in used:
                    continue
                pair = [HingeTerm(j, float(knot), +1), HingeTerm(j, float(knot), -1)]
                options = [pair] if room >= 2 else [[pair[0]], [pair[1]]]
                for new in options:
                    cand = np.column_stack([basis] + [t(X) for t in new])
                    err, c = _mse_of(cand, Y)
                    if best is None or err < best[0] - 1e-15:
                        best = (err, new, cand, c, key)
        if best is None or current - best[0] < min_improvement:
            break
        current, new, basis, coef, key = best
        terms.extend(new)
        used.add(key)
        path.append(current)
    return HingeModel(tuple(terms), coef, tuple(path))


def split_digest(train_idx: Sequence[int], test_idx: Sequence[int]) -> str:
    h = hashlib.sha256()
    h.update(np.asarray(train_idx, dtype=np.int64).tobytes())
    h.update(b"|")
    h.update(np.asarray(test_idx, dtype=np.int64).tobytes())
    return h.hexdigest()


@dataclass(frozen=True)
class MethodResult:
    method: str
    train_mse: float
    test_mse: float
    variance: float
    ignored_cvs: tuple[str, ...]
    split_hash: str


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple[MethodResult, ...]

    def __getitem__(self, method: str) -> MethodResult:
        for r in self.rows:
            if r.method == method:
                return r
        raise KeyError(method)

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["method", "train_mse", "test_mse", "variance", "ignored_cvs"])
            for r in self.rows:
                w.writerow([r.method, f"{r.train_mse:.6f}", f"{r.test_mse:.6f}",
                            f"{r.variance:.6f}", ";".join(r.ignored_cvs)])

    @classmethod
    def read_external(cls, path: str | Path) -> list[MethodResult]:
        """Rows produced elsewhere (e.g. a LARS run) in the same CSV layout."""
        rows = []
        with Path(path).open(newline="", encoding="utf-8") as fh:
            for rec in csv.DictReader(fh):
                ignored = tuple(c for c in rec.get("ignored_cvs", "").split(";") if c)
                rows.append(MethodResult(rec["method"], float(rec["train_mse"]), float(rec["test_mse"]),
                                         float(rec["variance"]), ignored, "external"))
        return rows


def _sq_stats(pred: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    sq = (pred - y) ** 2
    return float(np.mean(sq)), float(np.var(sq))


def compare(ds, schema, opts=None, split_spec=None, *, max_terms: int = 10,
            min_improvement: float = 1e-6) -> ComparisonReport:
    """Fit CHI, OLS and the hinge model on one split and tabulate their errors.

    Every method sees the same split, the same normalization and the same CV
    set: the CVs the schema keeps (dominant, weak). CVs the schema removes
    count as ignored by every method.
    """
    from .evaluation import SplitSpec, split_indices
    from .dataset import prepare
    from .model import influence
    from .schema import validate_schema
    from .training import TrainOptions, evaluate_holdout, fit

    opts = opts or TrainOptions()
    split_spec = split_spec or SplitSpec()
    schema = validate_schema(schema, ds).schema
    train_idx, test_idx = split_indices(ds.n_rows, split_spec)
    digest = split_digest(train_idx, test_idx)
    train, stats = prepare(ds.take(train_idx), schema)
    test, _ = prepare(ds.take(test_idx), schema, stats)

    removed = [c.name for c in schema.cvs if c.role in ("unimportant", "strong")]
    features = [c.name for c in schema.cvs if c.role in ("dominant", "weak")]
    fidx = [train.columns.index(c) for c in features]
    Xtr, Xte = train.values[:, fidx], test.values[:, fidx]
    ytr, yte = train.observed, test.observed
    eps = stats.eps_norm

    model, trace = fit(train, schema, opts, stats)
    chi_train = evaluate_holdout(model, train)
    chi_test = evaluate_holdout(model, test)
    chi_infl = {c.cv: abs(influence(c, model.eps_h, eps)) for c in model.curves}
    chi_ignored = removed + [c for c in features if chi_infl[c] < NEAR_ZERO]

    ols = ols_fit(Xtr, ytr)
    ols_tr, _ = _sq_stats(ols.predict(Xtr), ytr)
    ols_te, ols_var = _sq_stats(ols.predict(Xte), yte)
    ols_inf = ols.influence(eps, 1.0)

    hinge = hinge_fit(Xtr, ytr, max_terms, min_improvement)
    h_tr, _ = _sq_stats(hinge.predict(Xtr), ytr)
    h_te, h_var = _sq_stats(hinge.predict(Xte), yte)
    h_inf = hinge.influence(len(features), eps, 1.0)

    def ignored(infl):
        return tuple(removed + [c for c, v in zip(features, infl) if v < NEAR_ZERO])

    return ComparisonReport((
        MethodResult("chi", chi_train.mse, chi_test.mse, chi_test.variance, tuple(chi_ignored), digest),
        MethodResult("ols", ols_tr, ols_te, ols_var, ignored(ols_inf), digest),
        MethodResult("hinge", h_tr, h_te, h_var, ignored(h_inf), digest),
    ))
