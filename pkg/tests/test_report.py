import math

import pytest

from fairbench.report import canonical_json


def test_canonical_json_sorted_keys_and_floats():
    out = canonical_json({"b": 1.0, "a": {"z": 0.1, "y": None}, "c": [True, False, 2]})
    assert out == '{"a":{"y":null,"z":0.10000000000000001},"b":1,"c":[true,false,2]}'


def test_canonical_json_float_17_digits():
    assert canonical_json(1.0 / 3.0) == "0.33333333333333331"
    assert canonical_json(0.05) == "0.050000000000000003"
    assert canonical_json(2.0) == "2"
    assert canonical_json(-0.0) == "-0"


def test_canonical_json_escapes_non_ascii():
    assert canonical_json("Male×Male") == '"Male\\u00d7Male"'


def test_canonical_json_rejects_non_finite():
    with pytest.raises(ValueError):
        canonical_json(float("nan"))
    with pytest.raises(ValueError):
        canonical_json(math.inf)


def test_canonical_json_rejects_exotic_types():
    with pytest.raises(TypeError):
        canonical_json({"a": object()})
    with pytest.raises(TypeError):
        canonical_json({1: "non-string key"})


def test_canonical_json_deterministic():
    payload = {"values": [1e-300, 1e300, 1.5, -2.25], "s": "x"}
    assert canonical_json(payload) == canonical_json(dict(reversed(payload.items())))
