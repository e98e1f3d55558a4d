"""Train/test splitting, experiment runs and report artifacts."""

from __future__ import annotations

import csv
import math
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import ConfigDataset, prepare
from .errors import ContractError
from .model import CvCurve, HealthModel, curve_samples, save_model
from .schema import CvSchema, validate_schema
from .training import EvalReport, TrainOptions, TrainTrace, evaluate_holdout, fit

__all__ = ["EvalReport", "SplitSpec", "Experiment", "split", "split_indices", "run_experiment",
           "run_seeds", "write_curve_csv", "curve_svg"]


@dataclass(frozen=True)
class SplitSpec:
    ratio: float = 0.8
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self) -> None:
        if not 0.0 < self.ratio < 1.0:
            raise ContractError(f"split ratio must lie in (0, 1), got {self.ratio}")

    def describe(self) -> str:
        return f"{round(self.ratio * 100)}/{round((1 - self.ratio) * 100)} seed={self.seed}"


def split_indices(n: int, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    """Seeded shuffle, then the first ceil(ratio*n) indices train."""
    if n < 2:
        raise ContractError("need at least 2 rows to split")
    order = np.random.default_rng(spec.seed).permutation(n) if spec.shuffle else np.arange(n)
    n_train = math.ceil(spec.ratio * n)
    if n_train == 0 or n_train == n:
        raise ContractError(f"ratio {spec.ratio} leaves an empty side for N={n}")
    return order[:n_train], order[n_train:]


def split(ds: ConfigDataset, spec: SplitSpec) -> tuple[ConfigDataset, ConfigDataset]:
    tr, te = split_indices(ds.n_rows, spec)
    return ds.take(tr), ds.take(te)


@dataclass
class Experiment:
    report: EvalReport
    model: HealthModel
    trace: TrainTrace
    train_idx: np.ndarray
    test_idx: np.ndarray
    files: list[Path] = field(default_factory=list)


def run_experiment(ds: ConfigDataset, schema: CvSchema | None, opts: TrainOptions | None = None,
                   spec: SplitSpec | None = None, *, out_dir: str | Path | None = None,
                   name: str = "dataset", svg: bool = False) -> Experiment:
    """Fit on the training side (statistics frozen there), evaluate on the rest.

    When ``out_dir`` is given the report, model, trace and one curve CSV per
    participating CV are written there.
    """
    opts = opts or TrainOptions()
    spec = spec or SplitSpec()
    schema = validate_schema(schema, ds).schema
    start = time.perf_counter()
    train_idx, test_idx = split_indices(ds.n_rows, spec)
    train, stats = prepare(ds.take(train_idx), schema)
    test, _ = prepare(ds.take(test_idx), schema, stats)
    model, trace = fit(train, schema, opts, stats)
    report = evaluate_holdout(model, test, opts.objective)
    report.n_train = train.n_rows
    report.runtime_ms = (time.perf_counter() - start) * 1e3
    report.split = spec.describe()
    exp = Experiment(report, model, trace, train_idx, test_idx)
    if out_dir is not None:
        exp.files = write_artifacts(exp, out_dir, name, spec, svg=svg)
    return exp


def _ratio_tag(ratio: float) -> str:
    return f"{ratio:g}"


def write_artifacts(exp: Experiment, out_dir: str | Path, name: str, spec: SplitSpec,
                    *, svg: bool = False) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{name}_{_ratio_tag(spec.ratio)}_{spec.seed}"
    files = [out / f"{stem}.report.csv", out / f"{stem}.model.json", out / f"{stem}.trace.csv"]
    exp.report.write_csv(files[0])
    save_model(exp.model, files[1])
    exp.trace.write_csv(files[2])
    for c in exp.model.curves:
        path = out / f"{name}_{c.cv}.curve.csv"
        write_curve_csv([c], path, exp.model.eps_h)
        files.append(path)
        if svg:
            path = out / f"{name}_{c.cv}.curve.svg"
            path.write_text(curve_svg(c, exp.model.eps_h), encoding="utf-8")
            files.append(path)
    return files


def run_seeds(ds: ConfigDataset, schema: CvSchema | None, opts: TrainOptions | None = None,
              ratio: float = 0.8, seeds: Sequence[int] = range(5), **kwargs) -> tuple[list[Experiment], dict]:
    """One experiment per split seed plus a median summary."""
    runs = [run_experiment(ds, schema, opts, SplitSpec(ratio, s), **kwargs) for s in seeds]
    mses = [r.report.mse for r in runs]
    summary = {
        "ratio": ratio,
        "seeds": list(seeds),
        "mse": mses,
        "variance": [r.report.variance for r in runs],
        "median_mse": statistics.median(mses),
        "median_variance": statistics.median(r.report.variance for r in runs),
    }
    return runs, summary


def write_summary(summary: dict, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seed", "mse", "variance"])
        for s, m, v in zip(summary["seeds"], summary["mse"], summary["variance"]):
            w.writerow([s, f"{m:.6f}", f"{v:.6f}"])
        w.writerow(["median", f"{summary['median_mse']:.6f}", f"{summary['median_variance']:.6f}"])


def write_curve_csv(curves: Sequence[CvCurve], path: str | Path, eps_h: float, n_points: int = 101) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cv", "p_norm", "h"])
        for c in curves:
            for p, h in curve_samples(c, n_points, eps_h):
                w.writerow([c.cv, f"{p:.6f}", f"{h:.6f}"])


def curve_svg(curve: CvCurve, eps_h: float, width: int = 320, height: int = 240) -> str:
    """A self-contained SVG line chart of one health curve."""
    pad = 32
    pts = curve_samples(curve, 101, eps_h)
    w, h = width - 2 * pad, height - 2 * pad
    path = " ".join(f"{pad + p * w:.2f},{pad + (1 - v) * h:.2f}" for p, v in pts)
    title = f"{curve.cv} ({curve.shape}, eta={curve.eta:.3f}"
    if curve.shape == "unimodal":
        title += f", gamma={curve.gamma:.3f}, mode={curve.p_mode:.3f}"
    title += ")"
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="10">\n'
        f'<rect x="{pad}" y="{pad}" width="{w}" height="{h}" fill="none" stroke="#999"/>\n'
        f'<polyline points="{path}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>\n'
        f'<text x="{pad}" y="{pad - 8}">{title}</text>\n'
        f'<text x="{pad}" y="{height - 8}">0</text>\n'
        f'<text x="{width - pad - 10}" y="{height - 8}">1</text>\n'
        f'<text x="4" y="{pad + 4}">1</text>\n'
        f'<text x="4" y="{height - pad}">0</text>\n'
        "</svg>\n"
    )
