"""Build systems and shift vectors from config mappings."""

from __future__ import annotations

import numpy as np

from .shifts import WeightedShift, WeightedShiftSpec, WeightRule, power_system, scale_unimodular
from .spaces import GOLDEN, Contraction, Doubling, Interchange, InvalidInput, Rotation, System, Tent

SYSTEM_IDS = ("doubling", "rotation", "tent", "contraction", "interchange", "shift", "power", "scalar")


def parse_complex(value) -> complex:
    """Numbers, ``[re, im]`` pairs, or strings such as ``"i"`` and ``"-1"``."""
    if isinstance(value, bool):
        raise InvalidInput(f"not a scalar: {value!r}")
    if isinstance(value, (int, float, complex)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, str):
        try:
            return complex(value.replace(" ", "").replace("i", "j"))
        except ValueError:
            pass
    raise InvalidInput(f"cannot read a scalar from {value!r}")


def weight_rule(cfg) -> WeightRule:
    if cfg is None:
        return WeightRule()
    if isinstance(cfg, (int, float)):
        return WeightRule("constant", float(cfg))
    if not isinstance(cfg, dict):
        raise InvalidInput(f"weights must be a mapping, got {cfg!r}")
    rule = cfg.get("rule", "constant")
    if rule == "constant":
        return WeightRule("constant", float(cfg.get("value", 2.0)))
    if rule == "ratio":
        return WeightRule("ratio")
    if rule == "custom":
        tail = weight_rule(cfg["tail"]) if "tail" in cfg else None
        return WeightRule("custom", values=tuple(cfg.get("values", ())), tail=tail)
    raise InvalidInput(f"unknown weight rule {rule!r}")


def shift_spec(cfg: dict) -> WeightedShiftSpec:
    return WeightedShiftSpec(
        rule=weight_rule(cfg.get("weights")),
        block_dim=int(cfg.get("block_dim", 1)),
        truncation=int(cfg.get("truncation", 64)),
        field=str(cfg.get("field", "real")),
    )


def make_system(cfg) -> System:
    """``cfg`` is an id string or a mapping ``{id: ..., <params>}``."""
    if isinstance(cfg, str):
        cfg = {"id": cfg}
    if not isinstance(cfg, dict) or "id" not in cfg:
        raise InvalidInput(f"system spec needs an 'id', got {cfg!r}")
    kind = cfg["id"]
    if kind == "doubling":
        return Doubling()
    if kind == "rotation":
        return Rotation(float(cfg.get("alpha", GOLDEN)))
    if kind == "tent":
        return Tent()
    if kind == "contraction":
        return Contraction(float(cfg.get("c", 0.5)))
    if kind == "interchange":
        return Interchange()
    if kind == "shift":
        return WeightedShift(shift_spec(cfg))
    if kind == "power":
        return power_system(make_system(cfg["base"]), int(cfg.get("p", 1)))
    if kind == "scalar":
        return scale_unimodular(make_system(cfg["base"]), parse_complex(cfg.get("lambda", 1)))
    raise InvalidInput(f"unknown system id {kind!r}; known: {', '.join(SYSTEM_IDS)}")


def shift_vector(spec: WeightedShiftSpec, cfg) -> np.ndarray:
    """Read a blocked vector.

    Either a dense list of ``M`` blocks, or a sparse mapping from 1-based
    block index to the block.  A block is a list of ``d`` scalars or, for
    ``d = 1``, a bare scalar; complex scalars are ``[re, im]`` pairs.
    """
    v = spec.zeros()

    def block(value):
        if not isinstance(value, list) or (spec.block_dim == 1 and len(value) == 2 and not isinstance(value[0], list)):
            value = [value]
        if len(value) != spec.block_dim:
            raise InvalidInput(f"block must hold {spec.block_dim} scalars, got {value!r}")
        return [parse_complex(c) for c in value]

    if isinstance(cfg, dict):
        items = [(int(k), val) for k, val in cfg.items()]
    elif isinstance(cfg, list):
        items = list(enumerate(cfg, start=1))
    else:
        raise InvalidInput(f"cannot read a shift vector from {cfg!r}")
    for j, val in items:
        if not 1 <= j <= spec.truncation:
            raise InvalidInput(f"block index {j} outside [1, {spec.truncation}]")
        entries = np.array(block(val))
        if spec.field == "real":
            if np.any(entries.imag != 0):
                raise InvalidInput("complex entry in a real-field vector")
            entries = entries.real
        v[j - 1] = entries
    return v
