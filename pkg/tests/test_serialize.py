import json
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lambda_thermo import __version__, serialize


class Colour(Enum):
    RED = "red"


@dataclass
class Pair:
    a: float
    b: int


def test_jsonable_types():
    out = serialize.jsonable(
        {
            1: Fraction(3, 8),
            "arr": np.array([1.5, np.inf]),
            "i": np.int64(4),
            "b": np.bool_(True),
            "e": Colour.RED,
            "d": Pair(0.25, 2),
            "t": (float("-inf"), float("nan"), None),
        }
    )
    assert out == {
        "1": "3/8",
        "arr": [1.5, "inf"],
        "i": 4,
        "b": True,
        "e": "red",
        "d": {"a": 0.25, "b": 2},
        "t": ["-inf", "nan", None],
    }
    with pytest.raises(TypeError):
        serialize.jsonable(object())


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_floats_round_trip_bit_exact(x):
    env = serialize.make_envelope("pressure", {}, {"x": x})
    assert serialize.loads(serialize.dumps(env))["results"]["x"] == x


@given(
    st.recursive(
        st.none() | st.booleans() | st.integers() | st.floats(allow_nan=False) | st.text(),
        lambda inner: st.lists(inner, max_size=4) | st.dictionaries(st.text(), inner, max_size=4),
        max_leaves=20,
    )
)
def test_envelope_round_trip(payload):
    env = serialize.make_envelope("classify", {"lam": "0.3"}, payload, ["w"])
    assert serialize.loads(serialize.dumps(env)) == env or not _all_finite(payload)


def _all_finite(obj):
    if isinstance(obj, float):
        return math.isfinite(obj)
    if isinstance(obj, list):
        return all(_all_finite(x) for x in obj)
    if isinstance(obj, dict):
        return all(_all_finite(x) for x in obj.values())
    return True


def test_envelope_fields_and_digest():
    env = serialize.make_envelope("dimension", {"lam": 0.3}, {"points": [1.0]})
    assert env["schema_version"] == "1"
    assert env["version"] == __version__
    assert set(env) == {"schema_version", "command", "spec", "timestamp", "version", "results", "warnings"}
    other = dict(env, timestamp="2000-01-01T00:00:00+00:00", version="9.9")
    assert serialize.payload_digest(env) == serialize.payload_digest(other)
    changed = dict(env, results={"points": [2.0]})
    assert serialize.payload_digest(env) != serialize.payload_digest(changed)


def test_strict_json():
    text = serialize.dumps(serialize.make_envelope("x", {}, {"v": float("inf")}))
    assert "Infinity" not in text
    assert json.loads(text)["results"]["v"] == "inf"


def test_csv_text():
    text = serialize.csv_text([{"a": 0.1, "b": Fraction(1, 3)}, {"a": float("inf"), "c": None}])
    lines = text.splitlines()
    assert lines[0] == "a,b,c"
    assert lines[1] == "0.10000000000000001,1/3,"
    assert lines[2] == "inf,,"
    assert float(lines[1].split(",")[0]) == 0.1
    assert serialize.csv_text([{"a": 1}], columns=["b", "a"]).splitlines() == ["b,a", ",1"]
