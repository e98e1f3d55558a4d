import json

import numpy as np
import pytest

from chi.dataset import ConfigDataset
from chi.errors import ContractError, SchemaError
from chi.schema import (CvSchema, CvSpec, default_schema, load_schema, reduced_vector,
                        resolve_dependents, save_schema, validate_schema)


def _ds(*cols):
    return ConfigDataset(tuple(cols), np.arange(3 * len(cols), dtype=float).reshape(3, -1) + 1, [0.5] * 3)


def test_strong_dependent_is_function_of_parent():
    schema = CvSchema((CvSpec("p"), CvSpec("q", role="strong", parent="p", a=2.0)))
    assert resolve_dependents({"p": 0.3, "q": 99.0}, schema) == {"p": 0.3, "q": pytest.approx(0.6)}


def test_weak_dependent_offset():
    schema = CvSchema((CvSpec("p"), CvSpec("q", role="weak", parent="p", R=0.1)))
    out = resolve_dependents({"p": 0.5, "q": 0.0}, schema, {"q": 0.1})
    assert out["q"] == pytest.approx(0.55, rel=1e-15)
    with pytest.raises(ContractError):
        resolve_dependents({"p": 0.5, "q": 0.0}, schema, {"q": 0.2})


def test_role_aliases_and_unimportant_dropped():
    schema = CvSchema.from_dict({"cvs": [
        {"name": "p"}, {"name": "q", "role": "weak_dependent", "parent": "p", "R": 0.2},
        {"name": "s", "role": "strong_dependent", "parent": "p"}, {"name": "u", "role": "unimportant"},
    ]})
    assert [c.role for c in schema.cvs] == ["dominant", "weak", "strong", "unimportant"]
    assert [c.name for c in schema.participating] == ["p", "q"]
    assert reduced_vector([0.4, 0.0, 0.0, 7.0], schema).tolist() == [0.4, 0.4]


@pytest.mark.parametrize("kwargs, fragment", [
    ({"shape": "bathtub"}, "shape"),
    ({"role": "boss"}, "role"),
    ({"role": "weak"}, "parent"),
    ({"R": 2.0}, "R must"),
    ({"min": 3.0, "max": 1.0}, "min > max"),
    ({"transform": "sqrt"}, "transform"),
])
def test_bad_specs(kwargs, fragment):
    with pytest.raises(SchemaError, match=fragment):
        CvSpec("x", **kwargs)


def test_missing_column_is_error():
    with pytest.raises(SchemaError, match="absent from data"):
        validate_schema(CvSchema((CvSpec("a"), CvSpec("zzz"))), _ds("a"))


def test_data_only_column_is_defaulted():
    result = validate_schema(CvSchema((CvSpec("a"),)), _ds("a", "b"))
    assert result.ok
    info = [f for f in result.findings if f.cv == "b"]
    assert info and info[0].level == "info" and "defaulted: dominant, monotonic" in info[0].message
    spec = result.schema["b"]
    assert spec.role == "dominant" and spec.shape == "monotonic" and spec.defaulted


def test_cycle_is_error():
    schema = CvSchema((CvSpec("a", role="weak", parent="b"), CvSpec("b", role="weak", parent="a")))
    result = validate_schema(schema, _ds("a", "b"), strict=False)
    assert not result.ok
    assert any("cycle" in f.message for f in result.errors)
    with pytest.raises(SchemaError, match="cycle"):
        validate_schema(schema, _ds("a", "b"))


def test_parent_must_be_dominant():
    schema = CvSchema((CvSpec("a", role="unimportant"), CvSpec("b", role="weak", parent="a")))
    with pytest.raises(SchemaError, match="not dominant"):
        validate_schema(schema, _ds("a", "b"))


def test_out_of_bounds_values_warn():
    result = validate_schema(CvSchema((CvSpec("a", 0.0, 2.0),)), _ds("a"))
    assert result.ok
    assert any(f.level == "warning" and "outside" in f.message for f in result.findings)


def test_nothing_participating_is_error():
    with pytest.raises(SchemaError, match="no dominant"):
        validate_schema(CvSchema((CvSpec("a", role="unimportant"),)), _ds("a"))


def test_default_schema_uses_data_bounds():
    s = default_schema(_ds("a", "b"))
    assert (s["a"].min, s["a"].max) == (1.0, 5.0)


def test_schema_file_round_trip(tmp_path):
    schema = CvSchema((CvSpec("p", 0.0, 8.0, "unimodal", "log1p"),
                       CvSpec("q", role="weak", parent="p", a=0.5, b=0.1, R=0.2)),
                      target_bounds=(0.0, 1.0), target_name="perf")
    path = tmp_path / "s.json"
    save_schema(schema, path)
    assert load_schema(path) == schema
    json.loads(path.read_text())


def test_load_schema_rejects_garbage(tmp_path):
    path = tmp_path / "s.json"
    path.write_text("{not json")
    with pytest.raises(SchemaError):
        load_schema(path)
