"""JSON encodings for points, balls and nested-ball certificates.

Real coordinates are plain floats; complex coordinates are ``[re, im]``
pairs.  Python's float ``repr`` is the shortest string that round-trips,
so encoding and decoding is lossless.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .spaces import Ball, InvalidInput


def point_to_json(x) -> list:
    x = np.asarray(x)
    if np.iscomplexobj(x):
        return [[float(c.real), float(c.imag)] for c in x]
    return [float(c) for c in x]


def point_from_json(data) -> np.ndarray:
    if isinstance(data, (int, float)):
        return np.array([float(data)])
    if not isinstance(data, list):
        raise InvalidInput(f"cannot read a point from {data!r}")
    if data and all(isinstance(c, list) for c in data):
        if any(len(c) != 2 for c in data):
            raise InvalidInput("complex coordinates must be [re, im] pairs")
        return np.array([complex(re, im) for re, im in data])
    return np.array([float(c) for c in data])


def ball_to_json(b: Ball) -> dict:
    return {"center": point_to_json(b.center), "radius": b.radius}


def ball_from_json(data) -> Ball:
    try:
        return Ball(point_from_json(data["center"]), float(data["radius"]))
    except (KeyError, TypeError) as exc:
        raise InvalidInput(f"ball needs 'center' and 'radius': {data!r}") from exc


def jsonable(obj):
    """Recursively convert numpy scalars/arrays so ``json`` can encode them."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return point_to_json(obj) if obj.ndim == 1 else [jsonable(r) for r in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), indent=2, allow_nan=False) + "\n"
