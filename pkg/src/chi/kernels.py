"""Backend selection for the training hot loop.

The compiled ``chi._core`` extension is used when importable; otherwise, or
when the environment variable ``CHI_PURE_PYTHON`` is set to a non-empty value
other than ``0``, the numpy implementation in ``chi._kernels_py`` is used.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from types import ModuleType

import numpy as np

from . import _kernels_py

LEAK = 1e-3


def _select() -> tuple[ModuleType, str]:
    if os.environ.get("CHI_PURE_PYTHON", "") not in ("", "0"):
        return _kernels_py, "python"
    try:
        from . import _core
    except ImportError:
        return _kernels_py, "python"
    return _core, "cython"


_backend, BACKEND = _select()


def get_backend(name: str | None = None) -> ModuleType:
    """Return a kernel module by name ('cython' or 'python'); None means active."""
    if name is None:
        return _backend
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _core
        return _core
    raise ValueError(f"unknown backend {name!r}")


def available_backends() -> list[str]:
    names = ["python"]
    try:
        from . import _core  # noqa: F401
        names.insert(0, "cython")
    except ImportError:
        pass
    return names


@dataclass
class Plan:
    """Flat per-curve arrays describing a model, in the layout the kernels take.

    Curve k reads column ``col[k]`` of the normalized CV matrix; for weak
    dependents that column is the parent and the curve input is
    ``(dep_a*x + dep_b) * (1 + r)``.
    """

    col: np.ndarray
    kind: np.ndarray
    weak: np.ndarray
    dep_a: np.ndarray
    dep_b: np.ndarray
    eta: np.ndarray
    gamma: np.ndarray
    mode: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    r: np.ndarray

    def __post_init__(self) -> None:
        self.col = np.ascontiguousarray(self.col, dtype=np.int64)
        for name in ("kind", "weak"):
            setattr(self, name, np.ascontiguousarray(getattr(self, name), dtype=np.intc))
        for name in ("dep_a", "dep_b", "eta", "gamma", "mode", "lo", "hi", "r"):
            setattr(self, name, np.ascontiguousarray(getattr(self, name), dtype=np.float64))

    def copy(self) -> Plan:
        return Plan(*(np.array(getattr(self, f)) for f in self.__dataclass_fields__))

    def _args(self):
        return (self.col, self.kind, self.weak, self.dep_a, self.dep_b, self.eta,
                self.gamma, self.mode, self.lo, self.hi, self.r)


def forward(X: np.ndarray, plan: Plan, eps_h: float, backend: ModuleType | None = None):
    """Return (H, h): aggregated index per row and per-curve health matrix."""
    be = backend or _backend
    return be.forward(np.ascontiguousarray(X, dtype=np.float64), *plan._args(), float(eps_h))


def loss_grad(X: np.ndarray, O: np.ndarray, plan: Plan, eps_h: float, *, log_objective: bool = False,
              scale: float | None = None, leak: float = LEAK, backend: ModuleType | None = None):
    """Return (mse, H, grad_eta, grad_gamma, grad_r).

    ``scale`` multiplies the per-row factor 2*(H_n - O_n); the default 1/N
    yields the exact gradient of the mean squared error.
    """
    be = backend or _backend
    X = np.ascontiguousarray(X, dtype=np.float64)
    if scale is None:
        scale = 1.0 / X.shape[0]
    return be.loss_grad(X, np.ascontiguousarray(O, dtype=np.float64), *plan._args(),
                        float(eps_h), float(leak), bool(log_objective), float(scale))


def mode_scan(X: np.ndarray, O: np.ndarray, plan: Plan, k: int, candidates: np.ndarray, eps_h: float,
              *, log_objective: bool = False, backend: ModuleType | None = None) -> np.ndarray:
    """Objective for each candidate mode of curve ``k`` with all else held fixed."""
    be = backend or _backend
    return be.mode_scan(np.ascontiguousarray(X, dtype=np.float64),
                        np.ascontiguousarray(O, dtype=np.float64), *plan._args(), float(eps_h),
                        bool(log_objective), int(k), np.ascontiguousarray(candidates, dtype=np.float64))
