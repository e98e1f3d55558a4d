"""Loading, cleaning and normalizing configuration/performance tables.

A dataset is a matrix of configuration-variable (CV) values, one row per
configuration, plus one observed metric per row. The learner only ever sees
the normalized form, where every column lives in ``[eps_norm, 1]``.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from .errors import DatasetError

if TYPE_CHECKING:
    from .schema import CvSchema

EPS_NORM = 1e-3
NORMALIZED_HEADER = "# chi-normalized v1"
TRANSFORMS = ("linear", "log1p")


@dataclass(frozen=True)
class ConfigDataset:
    """N configurations by M CVs, with an optional observed-metric column.

    Missing cells are NaN in ``values``. ``observed`` is None for datasets
    that are only meant to be scored.
    """

    columns: tuple[str, ...]
    values: np.ndarray
    observed: np.ndarray | None = None
    target: str | None = None
    source_id: str = ""
    transformed: bool = False
    normalized: bool = False
    fill_values: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2:
            raise DatasetError(f"values must be 2-D, got shape {values.shape}")
        n, m = values.shape
        if n < 1 or m < 1:
            raise DatasetError(f"dataset needs N >= 1 and M >= 1, got N={n}, M={m}")
        if len(self.columns) != m:
            raise DatasetError(f"{len(self.columns)} column names for {m} columns")
        if len(set(self.columns)) != m:
            raise DatasetError("duplicate column names")
        values.setflags(write=False)
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "values", values)
        if self.observed is not None:
            obs = np.array(self.observed, dtype=np.float64, copy=True).reshape(-1)
            if obs.shape[0] != n:
                raise DatasetError(f"{obs.shape[0]} observed values for {n} rows")
            if not np.all(np.isfinite(obs)):
                raise DatasetError("observed metric must be finite on every row")
            obs.setflags(write=False)
            object.__setattr__(self, "observed", obs)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    def column(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self.columns.index(name)]
        except ValueError:
            raise DatasetError(f"no column named {name!r}") from None

    def take(self, rows: Sequence[int] | np.ndarray) -> ConfigDataset:
        """Return the subset of rows at the given indices, in that order."""
        idx = np.asarray(rows, dtype=np.intp)
        obs = None if self.observed is None else self.observed[idx]
        return dataclasses.replace(self, values=self.values[idx], observed=obs)

    def select(self, names: Iterable[str]) -> ConfigDataset:
        names = list(names)
        idx = [self.columns.index(c) for c in names]
        return dataclasses.replace(self, columns=tuple(names), values=self.values[:, idx])

    def missing_mask(self) -> np.ndarray:
        return np.isnan(self.values)


@dataclass(frozen=True)
class ColumnStats:
    name: str
    raw_min: float
    raw_max: float
    transform: str = "linear"
    fill: float | None = None

    @property
    def constant(self) -> bool:
        return self.raw_min == self.raw_max


@dataclass(frozen=True)
class NormStats:
    """Frozen normalization parameters, fitted on a training split."""

    columns: tuple[ColumnStats, ...]
    observed: ColumnStats | None
    eps_norm: float = EPS_NORM

    def __post_init__(self) -> None:
        if not 0.0 < self.eps_norm < 1.0:
            raise DatasetError(f"eps_norm must lie in (0, 1), got {self.eps_norm}")
        for col in (*self.columns, *([self.observed] if self.observed else [])):
            if not col.raw_min <= col.raw_max:
                raise DatasetError(f"column {col.name!r}: raw_min > raw_max")

    def __getitem__(self, name: str) -> ColumnStats:
        for col in self.columns:
            if col.name == name:
                return col
        raise KeyError(name)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    @property
    def constant_columns(self) -> list[str]:
        return [c.name for c in self.columns if c.constant]

    def to_dict(self) -> dict:
        def col(c: ColumnStats) -> dict:
            return {"name": c.name, "raw_min": c.raw_min, "raw_max": c.raw_max,
                    "transform": c.transform, "fill": c.fill}

        return {
            "eps_norm": self.eps_norm,
            "columns": [col(c) for c in self.columns],
            "observed": None if self.observed is None else col(self.observed),
        }

    @classmethod
    def from_dict(cls, data: dict) -> NormStats:
        def col(d: dict) -> ColumnStats:
            return ColumnStats(d["name"], float(d["raw_min"]), float(d["raw_max"]),
                               d.get("transform", "linear"), d.get("fill"))

        obs = data.get("observed")
        return cls(tuple(col(c) for c in data["columns"]),
                   None if obs is None else col(obs), float(data["eps_norm"]))


def _parse_cell(text: str) -> float:
    text = text.strip()
    if text == "":
        return math.nan
    return float(text)


def load_csv(path: str | Path, target: str | None = None, *, delimiter: str = ",",
             require_target: bool = True) -> ConfigDataset:
    """Read a header-first CSV into a dataset.

    ``target`` names the observed-metric column; the last column is used when
    it is None. With ``require_target=False`` a file that lacks the named
    target column is read as CV values only.
    """
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc
    reader = csv.reader(lines, delimiter=delimiter)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DatasetError(f"{path}: empty file") from None
    seen = set()
    for name in header:
        if name in seen:
            raise DatasetError(f"{path}: duplicate column name {name!r}")
        seen.add(name)

    if target is None:
        target_idx = len(header) - 1 if require_target else None
    elif target in header:
        target_idx = header.index(target)
    elif require_target:
        raise DatasetError(f"{path}: target column {target!r} not in header")
    else:
        target_idx = None

    rows: list[list[float]] = []
    obs: list[float] = []
    width = len(header)
    for i, raw in enumerate(reader, start=1):
        if not raw or all(c.strip() == "" for c in raw):
            continue
        if len(raw) != width:
            raise DatasetError(f"row {i}: expected {width} fields, got {len(raw)}")
        vals = []
        for j, cell in enumerate(raw):
            try:
                v = _parse_cell(cell)
            except ValueError:
                if j == target_idx:
                    raise DatasetError(f"row {i}: non-numeric observed value {cell!r}") from None
                raise DatasetError(f"row {i}, column {header[j]!r}: non-numeric value {cell!r}") from None
            if j == target_idx:
                if not math.isfinite(v):
                    raise DatasetError(f"row {i}: missing or non-finite observed value")
                obs.append(v)
            else:
                vals.append(v)
        rows.append(vals)
    if not rows:
        raise DatasetError(f"{path}: no data rows")

    cols = [h for j, h in enumerate(header) if j != target_idx]
    return ConfigDataset(
        columns=tuple(cols),
        values=np.array(rows, dtype=np.float64),
        observed=None if target_idx is None else np.array(obs),
        target=None if target_idx is None else header[target_idx],
        source_id=str(path),
    )


def write_csv(ds: ConfigDataset, path: str | Path, *, digits: int | None = None) -> None:
    """Write ``ds`` back out; normalized datasets get a provenance line."""
    path = Path(path)
    fmt = (lambda v: "" if math.isnan(v) else repr(float(v))) if digits is None else \
        (lambda v: "" if math.isnan(v) else f"{v:.{digits}f}")
    with path.open("w", newline="", encoding="utf-8") as fh:
        if ds.normalized:
            fh.write(NORMALIZED_HEADER + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        header = list(ds.columns)
        if ds.observed is not None:
            header.append(ds.target or "observed")
        writer.writerow(header)
        for i in range(ds.n_rows):
            row = [fmt(v) for v in ds.values[i]]
            if ds.observed is not None:
                row.append(fmt(ds.observed[i]))
            writer.writerow(row)


def drop_zero_observed(ds: ConfigDataset) -> ConfigDataset:
    """Remove rows whose observed metric is exactly zero."""
    if ds.observed is None:
        return ds
    keep = np.flatnonzero(ds.observed != 0.0)
    if keep.size == 0:
        raise DatasetError("every row has a zero observed metric")
    return ds if keep.size == ds.n_rows else ds.take(keep)


def fill_missing(ds: ConfigDataset, strategy: str = "median", value: float = 0.0,
                 fill_values: dict[str, float] | None = None) -> ConfigDataset:
    """Replace missing cells column by column.

    When ``fill_values`` is given (typically learned on a training split) it
    takes precedence over ``strategy`` for the columns it names.
    """
    if strategy not in ("median", "constant"):
        raise ValueError(f"unknown fill strategy {strategy!r}")
    out = np.array(ds.values)
    fills: dict[str, float] = {}
    for j, name in enumerate(ds.columns):
        col = out[:, j]
        mask = np.isnan(col)
        if fill_values is not None and name in fill_values:
            fill = fill_values[name]
        elif strategy == "constant":
            fill = float(value)
        else:
            if mask.all():
                raise DatasetError(f"column {name!r} has no values to take a median from")
            fill = float(np.median(col[~mask]))
        fills[name] = fill
        col[mask] = fill
    return dataclasses.replace(ds, values=out, fill_values=fills)


def apply_transform(ds: ConfigDataset, schema: CvSchema) -> ConfigDataset:
    """Apply each column's transform (``log1p`` maps p to ln(1+p))."""
    if ds.transformed:
        raise DatasetError("transform already applied to this dataset")
    out = np.array(ds.values)
    for j, name in enumerate(ds.columns):
        if schema.transform_of(name) != "log1p":
            continue
        col = out[:, j]
        bad = np.flatnonzero(col < 0)
        if bad.size:
            raise DatasetError(f"row {bad[0] + 1}, column {name!r}: log1p needs p >= 0, got {col[bad[0]]}")
        out[:, j] = np.log1p(col)
    return dataclasses.replace(ds, values=out, transformed=True)


def _transform_scalar(v: float, transform: str) -> float:
    return math.log1p(v) if transform == "log1p" else v


def fit_stats(ds: ConfigDataset, schema: CvSchema | None = None,
              eps_norm: float = EPS_NORM) -> NormStats:
    """Record per-column ranges of a transformed dataset.

    Expert bounds declared in the schema (passed through the column's
    transform) replace the data range for that column; the observed metric
    likewise uses the schema's target bounds when present.
    """
    if np.isnan(ds.values).any():
        raise DatasetError("fit_stats needs a dataset without missing values")
    cols = []
    for j, name in enumerate(ds.columns):
        transform = schema.transform_of(name) if schema is not None else "linear"
        lo, hi = float(ds.values[:, j].min()), float(ds.values[:, j].max())
        spec = schema.get(name) if schema is not None else None
        if spec is not None and spec.min is not None and spec.max is not None and not spec.defaulted:
            lo, hi = _transform_scalar(spec.min, transform), _transform_scalar(spec.max, transform)
        cols.append(ColumnStats(name, lo, hi, transform, ds.fill_values.get(name)))
    obs = None
    if ds.observed is not None:
        lo, hi = float(ds.observed.min()), float(ds.observed.max())
        if schema is not None and schema.target_bounds is not None:
            lo, hi = schema.target_bounds
        obs = ColumnStats(ds.target or "observed", lo, hi)
    return NormStats(tuple(cols), obs, eps_norm)


def _scale(x: np.ndarray, lo: float, hi: float, eps: float) -> np.ndarray:
    if hi == lo:
        return np.ones_like(x)
    return np.clip(eps + (1.0 - eps) * (x - lo) / (hi - lo), eps, 1.0)


def _unscale(y: np.ndarray, lo: float, hi: float, eps: float) -> np.ndarray:
    if hi == lo:
        return np.full_like(y, lo)
    return lo + (y - eps) * (hi - lo) / (1.0 - eps)


def normalize(ds: ConfigDataset, stats: NormStats) -> ConfigDataset:
    """Map every column affinely from [raw_min, raw_max] onto [eps_norm, 1].

    Values outside the fitted range are clamped. Constant columns map to 1.0;
    ``stats.constant_columns`` lists them.
    """
    if ds.normalized:
        raise DatasetError("dataset is already normalized")
    out = np.empty_like(ds.values)
    for j, name in enumerate(ds.columns):
        try:
            c = stats[name]
        except KeyError:
            raise DatasetError(f"no normalization stats for column {name!r}") from None
        out[:, j] = _scale(ds.values[:, j], c.raw_min, c.raw_max, stats.eps_norm)
    obs = ds.observed
    if obs is not None and stats.observed is not None:
        obs = _scale(obs, stats.observed.raw_min, stats.observed.raw_max, stats.eps_norm)
    return dataclasses.replace(ds, values=out, observed=obs, normalized=True)


def denormalize(ds: ConfigDataset, stats: NormStats) -> ConfigDataset:
    """Invert :func:`normalize` (exact on the interior of the raw range)."""
    out = np.empty_like(ds.values)
    for j, name in enumerate(ds.columns):
        c = stats[name]
        out[:, j] = _unscale(ds.values[:, j], c.raw_min, c.raw_max, stats.eps_norm)
    obs = ds.observed
    if obs is not None and stats.observed is not None:
        obs = _unscale(obs, stats.observed.raw_min, stats.observed.raw_max, stats.eps_norm)
    return dataclasses.replace(ds, values=out, observed=obs, normalized=False)


def prepare(ds: ConfigDataset, schema: CvSchema, stats: NormStats | None = None,
            eps_norm: float = EPS_NORM) -> tuple[ConfigDataset, NormStats]:
    """Run fill, transform and normalize in order.

    With ``stats`` None the statistics (fill values included) are fitted on
    ``ds``; otherwise the supplied training statistics are reused.
    """
    if stats is None:
        filled = fill_missing(ds)
        transformed = apply_transform(filled, schema)
        stats = fit_stats(transformed, schema, eps_norm)
    else:
        fills = {c.name: c.fill for c in stats.columns if c.fill is not None}
        filled = fill_missing(ds, fill_values=fills)
        transformed = apply_transform(filled, schema)
    return normalize(transformed, stats), stats
