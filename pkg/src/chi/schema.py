"""Per-CV expert knowledge: bounds, curve shape, dependency roles.

Schema files are JSON::

    {"cvs": [{"name": "mem", "min": 1, "max": 64, "shape": "monotonic",
              "transform": "linear", "role": "dominant"},
             {"name": "threads", "shape": "monotonic", "role": "weak",
              "parent": "cores", "a": 1.0, "b": 0.0, "R": 0.1}],
     "target": {"name": "perf", "min": 0, "max": 1e9}}

Dependency functions are affine, ``f(p) = a*p + b``, and are evaluated on
normalized values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ContractError, SchemaError

SHAPES = ("monotonic", "unimodal")
ROLES = ("dominant", "strong", "weak", "unimportant")
_ROLE_ALIASES = {"strong_dependent": "strong", "weak_dependent": "weak"}


@dataclass(frozen=True)
class CvSpec:
    name: str
    min: float | None = None
    max: float | None = None
    shape: str = "monotonic"
    transform: str = "linear"
    role: str = "dominant"
    parent: str | None = None
    a: float = 1.0
    b: float = 0.0
    R: float = 0.0
    defaulted: bool = False

    def __post_init__(self) -> None:
        if self.shape not in SHAPES:
            raise SchemaError(f"{self.name}: shape must be one of {SHAPES}, got {self.shape!r}")
        if self.transform not in ("linear", "log1p"):
            raise SchemaError(f"{self.name}: unknown transform {self.transform!r}")
        if self.role not in ROLES:
            raise SchemaError(f"{self.name}: role must be one of {ROLES}, got {self.role!r}")
        if self.role in ("strong", "weak") and not self.parent:
            raise SchemaError(f"{self.name}: {self.role} dependent needs a parent")
        if not 0.0 <= self.R <= 1.0:
            raise SchemaError(f"{self.name}: R must lie in [0, 1], got {self.R}")
        if self.min is not None and self.max is not None and self.min > self.max:
            raise SchemaError(f"{self.name}: min > max")

    def dependency(self, parent_value: float) -> float:
        return self.a * parent_value + self.b

    def to_dict(self) -> dict:
        d: dict = {"name": self.name}
        if self.min is not None:
            d["min"] = self.min
        if self.max is not None:
            d["max"] = self.max
        d.update(shape=self.shape, transform=self.transform, role=self.role)
        if self.parent is not None:
            d.update(parent=self.parent, a=self.a, b=self.b)
        if self.role == "weak":
            d["R"] = self.R
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> CvSpec:
        if "name" not in d:
            raise SchemaError("schema entry without a 'name'")
        role = _ROLE_ALIASES.get(d.get("role", "dominant"), d.get("role", "dominant"))
        return cls(
            name=str(d["name"]),
            min=None if d.get("min") is None else float(d["min"]),
            max=None if d.get("max") is None else float(d["max"]),
            shape=d.get("shape", "monotonic"),
            transform=d.get("transform", "linear"),
            role=role,
            parent=d.get("parent"),
            a=float(d.get("a", 1.0)),
            b=float(d.get("b", 0.0)),
            R=float(d.get("R", 0.0)),
        )


@dataclass(frozen=True)
class CvSchema:
    cvs: tuple[CvSpec, ...]
    target_bounds: tuple[float, float] | None = None
    target_name: str | None = None

    def __post_init__(self) -> None:
        names = [c.name for c in self.cvs]
        dup = {n for n in names if names.count(n) > 1}
        if dup:
            raise SchemaError(f"duplicate CV names: {sorted(dup)}")

    def get(self, name: str) -> CvSpec | None:
        for c in self.cvs:
            if c.name == name:
                return c
        return None

    def __getitem__(self, name: str) -> CvSpec:
        spec = self.get(name)
        if spec is None:
            raise SchemaError(f"CV {name!r} is not in the schema")
        return spec

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.cvs]

    def transform_of(self, name: str) -> str:
        spec = self.get(name)
        return "linear" if spec is None else spec.transform

    def by_role(self, role: str) -> list[CvSpec]:
        return [c for c in self.cvs if c.role == role]

    @property
    def participating(self) -> list[CvSpec]:
        """CVs that get a health curve: dominant and weak dependents, in order."""
        return [c for c in self.cvs if c.role in ("dominant", "weak")]

    def counts(self) -> dict[str, int]:
        return {role: len(self.by_role(role)) for role in ROLES}

    def to_dict(self) -> dict:
        d: dict = {"cvs": [c.to_dict() for c in self.cvs]}
        if self.target_bounds is not None or self.target_name is not None:
            t: dict = {}
            if self.target_name is not None:
                t["name"] = self.target_name
            if self.target_bounds is not None:
                t["min"], t["max"] = self.target_bounds
            d["target"] = t
        return d

    @classmethod
    def from_dict(cls, data: Mapping) -> CvSchema:
        if "cvs" not in data:
            raise SchemaError("schema document has no 'cvs' key")
        target = data.get("target") or {}
        bounds = None
        if target.get("min") is not None and target.get("max") is not None:
            bounds = (float(target["min"]), float(target["max"]))
        return cls(tuple(CvSpec.from_dict(d) for d in data["cvs"]), bounds, target.get("name"))


def load_schema(path: str | Path) -> CvSchema:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise SchemaError(f"cannot read schema {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"schema {path} is not valid JSON: {exc}") from exc
    return CvSchema.from_dict(data)


def save_schema(schema: CvSchema, path: str | Path) -> None:
    Path(path).write_text(json.dumps(schema.to_dict(), indent=2) + "\n", encoding="utf-8")


def default_schema(ds) -> CvSchema:
    """Every column dominant and monotonic, with bounds taken from the data."""
    cvs = []
    for j, name in enumerate(ds.columns):
        col = ds.values[:, j]
        col = col[~np.isnan(col)]
        lo, hi = (float(col.min()), float(col.max())) if col.size else (None, None)
        cvs.append(CvSpec(name, lo, hi, defaulted=True))
    return CvSchema(tuple(cvs))


@dataclass(frozen=True)
class Finding:
    level: str  # "error" | "warning" | "info"
    cv: str | None
    message: str

    def __str__(self) -> str:
        where = f"{self.cv}: " if self.cv else ""
        return f"{self.level}: {where}{self.message}"


def _find_cycle(schema: CvSchema) -> list[str] | None:
    parents = {c.name: c.parent for c in schema.cvs if c.parent}
    for start in parents:
        path = [start]
        node = parents.get(start)
        while node is not None:
            if node in path:
                return path[path.index(node):] + [node]
            path.append(node)
            node = parents.get(node)
    return None


@dataclass
class ValidationResult:
    schema: CvSchema
    findings: list[Finding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not any(f.level == "error" for f in self.findings)

    @property
    def errors(self) -> list[Finding]:
        return [f for f in self.findings if f.level == "error"]


def validate_schema(schema: CvSchema | None, ds, *, strict: bool = True) -> ValidationResult:
    """Check ``schema`` against ``ds`` and complete it for data-only columns.

    Columns present in the data but absent from the schema are added as
    dominant/monotonic with data-derived bounds. Missing columns and
    dependency cycles are errors; with ``strict`` they raise SchemaError.
    """
    if schema is None:
        schema = CvSchema(())
    findings: list[Finding] = []
    data_cols = set(ds.columns)

    for spec in schema.cvs:
        if spec.name not in data_cols:
            findings.append(Finding("error", spec.name, "named in schema but absent from data"))

    added = []
    defaults = default_schema(ds)
    for name in ds.columns:
        if schema.get(name) is None:
            added.append(defaults[name])
            findings.append(Finding("info", name, "defaulted: dominant, monotonic"))
    completed = replace(schema, cvs=schema.cvs + tuple(added))

    cycle = _find_cycle(completed)
    if cycle:
        findings.append(Finding("error", cycle[0], "dependency cycle " + " -> ".join(cycle)))
    else:
        for spec in completed.cvs:
            if spec.parent is None or spec.role not in ("strong", "weak"):
                continue
            parent = completed.get(spec.parent)
            if parent is None:
                findings.append(Finding("error", spec.name, f"parent {spec.parent!r} is not a known CV"))
            elif parent.role != "dominant":
                findings.append(Finding("error", spec.name, f"parent {spec.parent!r} is {parent.role}, not dominant"))

    for spec in completed.cvs:
        if spec.name not in data_cols:
            continue
        if spec.min is not None and spec.max is not None and not spec.defaulted:
            if spec.min == spec.max:
                findings.append(Finding("warning", spec.name, "min == max; column carries no information"))
            col = ds.column(spec.name)
            col = col[~np.isnan(col)]
            outside = int(np.count_nonzero((col < spec.min) | (col > spec.max)))
            if outside:
                findings.append(Finding("warning", spec.name, f"{outside} values outside [{spec.min}, {spec.max}]"))
        elif spec.defaulted and spec.min == spec.max:
            findings.append(Finding("warning", spec.name, "constant column; consider role 'unimportant'"))

    if not completed.participating:
        findings.append(Finding("error", None, "no dominant or weak CVs left to model"))

    result = ValidationResult(completed, findings)
    if strict and not result.ok:
        raise SchemaError("; ".join(str(f) for f in result.errors))
    return result


def resolve_dependents(row: Mapping[str, float] | Sequence[float], schema: CvSchema,
                       offsets: Mapping[str, float] | None = None) -> dict[str, float]:
    """Replace dependent CVs by their parent-derived values.

    Strong dependents become ``f(parent)``, weak dependents
    ``f(parent) * (1 + r)`` with ``|r| <= R``; unimportant CVs are dropped.
    ``row`` is a mapping by name or a sequence in schema order.
    """
    if not isinstance(row, Mapping):
        row = dict(zip(schema.names, row))
    offsets = offsets or {}
    out: dict[str, float] = {}
    for spec in schema.cvs:
        if spec.role == "unimportant":
            continue
        if spec.role == "dominant":
            out[spec.name] = float(row[spec.name])
            continue
        parent = float(row[spec.parent])
        if spec.role == "strong":
            out[spec.name] = spec.dependency(parent)
        else:
            r = float(offsets.get(spec.name, 0.0))
            if abs(r) > spec.R:
                raise ContractError(f"{spec.name}: offset {r} outside [-{spec.R}, {spec.R}]")
            out[spec.name] = spec.dependency(parent) * (1.0 + r)
    return out


def reduced_vector(row, schema: CvSchema, offsets: Mapping[str, float] | None = None) -> np.ndarray:
    """Values of the participating CVs only (dominant and weak), in order."""
    resolved = resolve_dependents(row, schema, offsets)
    return np.array([resolved[c.name] for c in schema.participating])
