import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from translab.catalogue import make_system, parse_complex, shift_vector
from translab.serialize import ball_from_json, ball_to_json, dumps, point_from_json, point_to_json
from translab.shifts import WeightedShiftSpec
from translab.spaces import Ball, InvalidInput

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@given(st.lists(finite, min_size=1, max_size=6))
def test_real_points_round_trip(xs):
    x = np.array(xs)
    assert np.array_equal(point_from_json(json.loads(json.dumps(point_to_json(x)))), x)


@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=6))
def test_complex_points_round_trip(pairs):
    x = np.array([complex(a, b) for a, b in pairs])
    data = json.loads(json.dumps(point_to_json(x)))
    assert all(len(c) == 2 for c in data)
    assert np.array_equal(point_from_json(data), x)


def test_ball_round_trip_and_errors():
    b = Ball(np.array([0.1, 0.2]), 1 / 3)
    assert ball_from_json(json.loads(json.dumps(ball_to_json(b)))) == b
    with pytest.raises(InvalidInput):
        ball_from_json({"center": [0.1]})
    with pytest.raises(InvalidInput):
        point_from_json([[1.0, 2.0, 3.0]])


def test_dumps_refuses_nan_and_handles_numpy():
    text = dumps({"a": np.float64(0.1), "b": np.int64(3), "c": np.bool_(True), "d": np.array([1.5])})
    assert json.loads(text) == {"a": 0.1, "b": 3, "c": True, "d": [1.5]}
    assert json.loads(dumps({"x": float("inf")}))["x"] == "inf"


@pytest.mark.parametrize("raw,expected", [(1, 1), (-1, -1), ("i", 1j), ("-i", -1j), ([0, 1], 1j), ("0.6+0.8i", 0.6 + 0.8j)])
def test_parse_complex(raw, expected):
    assert parse_complex(raw) == expected


@pytest.mark.parametrize("raw", [True, "one", [1, 2, 3], None])
def test_parse_complex_rejects(raw):
    with pytest.raises(InvalidInput):
        parse_complex(raw)


def test_catalogue_builds_every_id():
    for cfg in ("doubling", "tent", "interchange", {"id": "rotation", "alpha": 0.25}, {"id": "contraction", "c": 0.3}):
        assert make_system(cfg).kind == (cfg if isinstance(cfg, str) else cfg["id"])
    shift = make_system({"id": "shift", "weights": {"rule": "custom", "values": [1, 2], "tail": {"rule": "ratio"}}, "truncation": 8})
    assert shift.spec.weights.tolist() == pytest.approx([1, 2, 4 / 3, 5 / 4, 6 / 5, 7 / 6, 8 / 7, 9 / 8])
    power = make_system({"id": "power", "p": 3, "base": "doubling"})
    assert power.lipschitz == 8
    scalar = make_system({"id": "scalar", "lambda": "-1", "base": {"id": "shift", "weights": 2}})
    assert scalar.lam == -1
    with pytest.raises(InvalidInput):
        make_system({"id": "scalar", "lambda": "i", "base": "doubling"})
    with pytest.raises(InvalidInput):
        make_system({"id": "shift", "weights": {"rule": "geometric"}})


def test_shift_vector_forms():
    spec = WeightedShiftSpec(block_dim=2, truncation=4, field="complex")
    dense = shift_vector(spec, [[1, 0], [0, [0, 1]], [0, 0], [0, 0]])
    sparse = shift_vector(spec, {"1": [1, 0], 2: [0, "i"]})
    assert np.array_equal(dense, sparse)
    real = WeightedShiftSpec(truncation=4)
    assert shift_vector(real, {3: 2.5})[2, 0] == 2.5
    with pytest.raises(InvalidInput):
        shift_vector(real, {5: 1.0})
    with pytest.raises(InvalidInput):
        shift_vector(real, {1: "i"})
    with pytest.raises(InvalidInput):
        shift_vector(spec, {1: [1, 2, 3]})
