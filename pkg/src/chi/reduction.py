"""Advisory PCA ranking of configuration variables.

Nothing here removes a CV. The report ranks columns so that a domain expert
can decide which to mark ``unimportant`` in the schema.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

DROP_FRACTION = 0.2


@dataclass(frozen=True)
class ReductionRow:
    cv: str
    score: float
    rank: int
    loading: float
    recommendation: str
    decision: str = ""


@dataclass(frozen=True)
class ReductionReport:
    rows: tuple[ReductionRow, ...]
    explained_variance: np.ndarray
    warnings: tuple[str, ...] = ()

    @property
    def recommended_drop(self) -> list[str]:
        return [r.cv for r in self.rows if r.recommendation == "drop"]

    def scores(self) -> dict[str, float]:
        return {r.cv: r.score for r in self.rows}

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["cv", "score", "rank", "recommendation"])
            for r in self.rows:
                w.writerow([r.cv, f"{r.score:.6f}", r.rank, r.recommendation])


def pca_rank(ds, drop_fraction: float = DROP_FRACTION) -> ReductionReport:
    """Rank CVs by explained-variance-weighted absolute PCA loadings.

    importance_m = sum_j (lambda_j / sum(lambda)) * |v_mj|, where v_j are the
    unit eigenvectors of the CV covariance matrix. CVs scoring below
    ``drop_fraction`` of the top score are recommended for dropping.
    """
    X = np.asarray(ds.values, dtype=np.float64)
    n, m = X.shape
    warnings: list[str] = []
    if n <= m:
        warnings.append(f"only {n} rows for {m} CVs; loadings are unstable")
    if np.isnan(X).any():
        raise ValueError("pca_rank needs a dataset without missing values")

    centered = X - X.mean(axis=0)
    cov = centered.T @ centered / max(n - 1, 1)
    total = float(np.trace(cov))
    if total <= 0.0:
        warnings.append("all columns are constant; every score is 0")
        scores = np.zeros(m)
        eigvals = np.zeros(m)
        top_loading = np.zeros(m)
    else:
        eigvals, eigvecs = np.linalg.eigh(cov)
        order = np.argsort(eigvals)[::-1]
        eigvals = np.clip(eigvals[order], 0.0, None)
        eigvecs = eigvecs[:, order]
        frac = eigvals / eigvals.sum()
        scores = np.abs(eigvecs) @ frac
        # zero-variance columns have no share in any informative component
        scores[np.diag(cov) == 0.0] = 0.0
        top_loading = np.abs(eigvecs[:, 0])

    for w in warnings:
        log.warning(w)

    order = sorted(range(m), key=lambda j: (-scores[j], ds.columns[j]))
    cutoff = drop_fraction * float(scores.max()) if m else 0.0
    rows = []
    for rank, j in enumerate(order, start=1):
        drop = scores[j] == 0.0 or scores[j] < cutoff
        rows.append(ReductionRow(ds.columns[j], float(scores[j]), rank,
                                 float(top_loading[j]), "drop" if drop else "keep"))
    return ReductionReport(tuple(rows), eigvals, tuple(warnings))
