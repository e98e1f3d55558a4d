"""Synthetic datasets drawn from a known health model."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import EPS_NORM, ColumnStats, ConfigDataset, NormStats
from .model import EPS_H, CvCurve, HealthModel, score
from .schema import CvSchema, CvSpec


@dataclass(frozen=True)
class SynthSpec:
    n_cvs: int = 6
    n_rows: int = 200
    noise_sigma: float = 0.0
    seed: int = 0
    shapes: Sequence[str] | None = None
    eta_range: tuple[float, float] = (1.0, 8.0)
    gamma_range: tuple[float, float] = (0.05, 0.3)
    mode_range: tuple[float, float] = (0.5, 0.9)
    dead_cvs: int = 0
    eps_norm: float = EPS_NORM

    def __post_init__(self) -> None:
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.n_cvs < 1 or self.n_rows < 1:
            raise ValueError("need at least one CV and one row")
        if self.shapes is not None and len(self.shapes) != self.n_cvs:
            raise ValueError("shapes must list one entry per CV")

    def shape_list(self) -> list[str]:
        if self.shapes is not None:
            return list(self.shapes)
        return ["unimodal" if i % 2 else "monotonic" for i in range(self.n_cvs)]


def generate(spec: SynthSpec) -> tuple[ConfigDataset, HealthModel]:
    """Sample a ground-truth model and a dataset scored by it.

    CV values are uniform on [eps_norm, 1]; the observed column is the
    model's score plus Gaussian noise, clamped to [eps_norm, 1]. Dead CVs are
    extra columns with no effect on the score; the schema marks them
    unimportant. The returned schema fixes every bound to [eps_norm, 1] so
    normalization is the identity.
    """
    rng = np.random.default_rng(spec.seed)
    eps = spec.eps_norm
    names = [f"cv{i + 1}" for i in range(spec.n_cvs)]
    dead = [f"dead{i + 1}" for i in range(spec.dead_cvs)]

    curves = []
    for name, shape in zip(names, spec.shape_list()):
        eta = float(rng.uniform(*spec.eta_range))
        if shape == "unimodal":
            gamma = float(rng.uniform(*spec.gamma_range))
            mode = float(rng.uniform(*spec.mode_range))
        else:
            gamma, mode = 0.0, 0.5 * (eps + 1.0)
        curves.append(CvCurve(name, shape, eta, gamma, mode, eps, 1.0))

    columns = names + dead
    X = rng.uniform(eps, 1.0, size=(spec.n_rows, len(columns)))
    noise = rng.normal(0.0, spec.noise_sigma, size=spec.n_rows) if spec.noise_sigma > 0 else None

    cvs = [CvSpec(c.cv, eps, 1.0, c.shape) for c in curves]
    cvs += [CvSpec(d, eps, 1.0, role="unimportant") for d in dead]
    schema = CvSchema(tuple(cvs), target_bounds=(eps, 1.0), target_name="perf")
    stats = NormStats(tuple(ColumnStats(c, eps, 1.0) for c in columns),
                      ColumnStats("perf", eps, 1.0), eps)
    truth = HealthModel(tuple(curves), stats, schema, {}, EPS_H,
                        {"epochs": 0, "final_mse": 0.0, "seed": spec.seed, "source": "synth"})

    raw = ConfigDataset(tuple(columns), X, source_id=f"synth(seed={spec.seed})")
    O = score(raw, truth).H
    if noise is not None:
        O = np.clip(O + noise, eps, 1.0)
    ds = ConfigDataset(tuple(columns), X, O, "perf", f"synth(seed={spec.seed})")
    return ds, truth
