"""Backward weighted shifts on truncated l2(H) with H = C^d (or R^d).

A vector is stored as an ``(M, d)`` array of blocks; block ``j`` in the
1-based numbering used throughout the docstrings is row ``j - 1``.  The
shift sends block ``j + 1`` to block ``j`` scaled by ``w_{j+1}`` and
kills block 1.  Nothing is ever silently truncated: any operation that
would push mass past block ``M`` raises :class:`InvalidInput`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spaces import InvalidInput, PowerSystem, ScaledSystem, System

UNIMODULAR_TOL = 1e-12


@dataclass(frozen=True)
class WeightRule:
    """Generator of a positive weight sequence ``w_1, w_2, ...``.

    ``kind`` is ``"constant"`` (every weight equals ``value``),
    ``"ratio"`` (``w_n = (n + 1) / n``) or ``"custom"`` (``values`` first,
    then ``tail`` evaluated at the global index).
    """

    kind: str = "constant"
    value: float = 2.0
    values: tuple = ()
    tail: "WeightRule | None" = None

    def __post_init__(self):
        if self.kind not in ("constant", "ratio", "custom"):
            raise InvalidInput(f"unknown weight rule {self.kind!r}")
        if self.kind == "constant" and not self.value > 0:
            raise InvalidInput("constant weight must be positive")
        if self.kind == "custom":
            vals = tuple(float(v) for v in self.values)
            if not vals or min(vals) <= 0:
                raise InvalidInput("custom weights must be a non-empty list of positive numbers")
            object.__setattr__(self, "values", vals)
            if self.tail is None:
                object.__setattr__(self, "tail", WeightRule("constant", 1.0))

    def weights(self, n: int, start: int = 1) -> np.ndarray:
        """Weights ``w_start, ..., w_{start + n - 1}``."""
        idx = np.arange(start, start + n, dtype=np.float64)
        if self.kind == "constant":
            return np.full(n, float(self.value))
        if self.kind == "ratio":
            return (idx + 1.0) / idx
        head = np.asarray(self.values)
        out = np.empty(n)
        k = len(head)
        inside = idx <= k
        out[inside] = head[idx[inside].astype(int) - 1]
        if not inside.all():
            first = int(idx[~inside][0])
            out[~inside] = self.tail.weights(int((~inside).sum()), start=first)
        return out

    def describe(self) -> dict:
        if self.kind == "constant":
            return {"rule": "constant", "value": float(self.value)}
        if self.kind == "ratio":
            return {"rule": "ratio"}
        return {"rule": "custom", "values": list(self.values), "tail": self.tail.describe()}


@dataclass(frozen=True)
class WeightedShiftSpec:
    rule: WeightRule = field(default_factory=WeightRule)
    block_dim: int = 1
    truncation: int = 64
    field: str = "real"

    def __post_init__(self):
        if self.block_dim < 1:
            raise InvalidInput("block_dim must be >= 1")
        if self.truncation < 2:
            raise InvalidInput("truncation must be >= 2")
        if self.field not in ("real", "complex"):
            raise InvalidInput(f"scalar field must be 'real' or 'complex', got {self.field!r}")

    @property
    def dtype(self):
        return np.complex128 if self.field == "complex" else np.float64

    @property
    def weights(self) -> np.ndarray:
        """``w_1 .. w_M`` for the active window."""
        return self.rule.weights(self.truncation)

    @property
    def log_partial(self) -> np.ndarray:
        """``log(w_1 ... w_j)`` for ``j = 0 .. M`` (entry 0 is the empty product)."""
        return np.concatenate([[0.0], np.cumsum(np.log(self.weights))])

    def zeros(self) -> np.ndarray:
        return np.zeros((self.truncation, self.block_dim), dtype=self.dtype)

    def unit(self, j: int, k: int = 0, scale=1.0) -> np.ndarray:
        """``scale * e_j`` with the mass in component ``k`` of block ``j``."""
        if not 1 <= j <= self.truncation:
            raise InvalidInput(f"block index {j} outside [1, {self.truncation}]")
        v = self.zeros()
        v[j - 1, k] = scale
        return v

    def vector(self, v) -> np.ndarray:
        """Coerce flat or blocked input to an ``(M, d)`` array."""
        arr = np.asarray(v)
        if np.iscomplexobj(arr) and self.field == "real":
            if np.any(arr.imag != 0):
                raise InvalidInput("complex entries in a real-field shift vector")
            arr = arr.real
        arr = arr.astype(self.dtype)
        if arr.shape == (self.truncation * self.block_dim,):
            arr = arr.reshape(self.truncation, self.block_dim)
        if arr.shape != (self.truncation, self.block_dim):
            raise InvalidInput(f"shift vector has shape {arr.shape}, expected ({self.truncation}, {self.block_dim})")
        return arr

    def describe(self) -> dict:
        return {
            "weights": self.rule.describe(),
            "block_dim": self.block_dim,
            "truncation": self.truncation,
            "field": self.field,
        }


def support(v: np.ndarray) -> int:
    """Largest 1-based block index carrying a nonzero entry (0 for the zero vector)."""
    nz = np.flatnonzero(np.any(np.asarray(v) != 0, axis=-1))
    return int(nz[-1]) + 1 if nz.size else 0


class WeightedShift(System):
    """The backward weighted shift as a :class:`System` on flattened vectors."""

    kind = "shift"
    space = "euclidean"
    linear = True

    def __init__(self, spec: WeightedShiftSpec):
        self.spec = spec
        self.dim = spec.truncation * spec.block_dim
        self.dtype = spec.dtype
        self._w = spec.weights
        # block M receives nothing, so w_1 never acts
        self.lipschitz = float(self._w[1:].max())

    def step(self, pts):
        M, d = self.spec.truncation, self.spec.block_dim
        v = pts.reshape(-1, M, d)
        out = np.zeros_like(v)
        out[:, :-1] = self._w[1:, None] * v[:, 1:]
        return out.reshape(pts.shape)

    def params(self):
        return self.spec.describe()


def shift_apply(spec: WeightedShiftSpec, v) -> np.ndarray:
    v = spec.vector(v)
    out = spec.zeros()
    out[:-1] = spec.weights[1:, None] * v[1:]
    return out


def right_inverse_apply(spec: WeightedShiftSpec, v, n: int) -> np.ndarray:
    """Push ``v`` forward ``n`` blocks, dividing by the traversed weights.

    Block ``j + n`` of the result is block ``j`` of ``v`` divided by
    ``w_{j+1} ... w_{j+n}``, so ``shift_apply`` applied ``n`` times undoes it.
    """
    v = spec.vector(v)
    if n < 0:
        raise InvalidInput("n must be non-negative")
    s = support(v)
    if s + n > spec.truncation:
        raise InvalidInput(f"support {s} + {n} exceeds truncation {spec.truncation}")
    if n == 0:
        return v.copy()
    out = spec.zeros()
    scale = 1.0 / _window_products(spec, s, n)
    out[n : n + s] = v[:s] * scale[:, None]
    return out


def _window_products(spec: WeightedShiftSpec, s: int, n: int) -> np.ndarray:
    """``w_{j+1} ... w_{j+n}`` for ``j = 1 .. s``; log space only if the direct product overflows."""
    w = spec.weights
    prods = np.lib.stride_tricks.sliding_window_view(w[1:], n)[:s].prod(axis=1)
    if np.all(np.isfinite(prods)) and np.all(prods > 0):
        return prods
    lp = spec.log_partial
    j = np.arange(1, s + 1)
    return np.exp(lp[j + n] - lp[j])


def _right_inverse_norm(spec: WeightedShiftSpec, v: np.ndarray, n: int) -> float:
    s = support(v)
    if s == 0:
        return 0.0
    lp = spec.log_partial
    j = np.arange(1, s + 1)
    block_sq = np.sum(np.abs(v[:s]) ** 2, axis=1)
    return float(math.sqrt(np.sum(block_sq * np.exp(2.0 * (lp[j] - lp[j + n])))))


# -- Salas partial products --------------------------------------------------


@dataclass
class SalasVerdict:
    satisfied: bool
    horizon: int
    threshold: float
    max_log_product: float
    argmax: int
    log_products: np.ndarray = field(repr=False)

    @property
    def label(self) -> str:
        return "criterion-satisfied-at-horizon" if self.satisfied else "not-satisfied-at-horizon"

    def to_dict(self, trace: int = 64) -> dict:
        step = max(1, len(self.log_products) // trace)
        return {
            "verdict": self.label,
            "horizon": self.horizon,
            "threshold": self.threshold,
            "max_log_product": self.max_log_product,
            "argmax": self.argmax,
            "trace": [[i + 1, float(self.log_products[i])] for i in range(0, len(self.log_products), step)],
        }


def salas_verdict(spec: WeightedShiftSpec | WeightRule, horizon: int, threshold: float) -> SalasVerdict:
    """Check whether ``w_1 ... w_n`` reaches ``threshold`` for some ``n <= horizon``.

    Products are accumulated as sums of logs, so horizons of 10^6 and more
    do not overflow.  A finite horizon can only confirm growth.
    """
    if horizon < 1 or not threshold > 0:
        raise InvalidInput("horizon must be >= 1 and threshold > 0")
    rule = spec.rule if isinstance(spec, WeightedShiftSpec) else spec
    logs = np.cumsum(np.log(rule.weights(int(horizon))))
    i = int(np.argmax(logs))
    return SalasVerdict(
        satisfied=bool(logs[i] >= math.log(threshold)),
        horizon=int(horizon),
        threshold=float(threshold),
        max_log_product=float(logs[i]),
        argmax=i + 1,
        log_products=logs,
    )


# -- wrappers (powers, unimodular multiples) ---------------------------------


def power_system(system: System, p: int) -> System:
    """The map applied ``p`` times per step."""
    if int(p) != p or p < 1:
        raise InvalidInput(f"power must be a positive integer, got {p!r}")
    return PowerSystem(system, int(p))


def scale_unimodular(system: System, lam) -> System:
    """``lam * T`` for a linear ``T`` and ``|lam| = 1``."""
    lam = complex(lam)
    if abs(abs(lam) - 1.0) > UNIMODULAR_TOL:
        raise InvalidInput(f"|lambda| must be 1, got {abs(lam)!r}")
    if not system.linear:
        raise InvalidInput(f"{system.kind} is not linear; scalar multiples are only defined for the shift family")
    if system.dtype is not np.complex128 and lam not in (1, -1):
        raise InvalidInput("a real-field system only admits lambda = +1 or -1")
    return ScaledSystem(system, lam)


def unwrap(system: System) -> tuple[WeightedShiftSpec, int, complex]:
    """Reduce a wrapped shift to ``(spec, stride, mu)``: one step is ``mu * B_w^stride``."""
    if isinstance(system, WeightedShift):
        return system.spec, 1, 1.0
    if isinstance(system, PowerSystem):
        spec, stride, mu = unwrap(system.base)
        return spec, stride * system.p, mu ** system.p
    if isinstance(system, ScaledSystem):
        spec, stride, mu = unwrap(system.base)
        return spec, stride, mu * system.lam
    raise InvalidInput(f"{system.kind} is not a weighted-shift system")


def is_shift_family(system: System) -> bool:
    try:
        unwrap(system)
    except InvalidInput:
        return False
    return True


# -- transitivity witnesses --------------------------------------------------


@dataclass
class ShiftWitness:
    z: np.ndarray = field(repr=False)
    n: int
    distance_u: float


def transitivity_witness(target, u, v, eps_u: float, eps_v: float | None = None, max_time: int | None = None) -> ShiftWitness | None:
    """A point near ``u`` whose ``n``-th image is exactly ``v``.

    ``target`` is a spec or a (possibly wrapped) shift system.  With one
    step equal to ``mu * B^s`` the witness is ``u + mu^-n R^{sn} v`` for the
    smallest ``n >= 1`` such that ``B^{sn}`` kills ``u``, the correction is
    shorter than ``eps_u`` and the support still fits.  ``eps_v`` is
    accepted for symmetry; the image lands on ``v`` up to rounding.
    """
    if isinstance(target, WeightedShiftSpec):
        spec, stride, mu = target, 1, 1.0
    else:
        spec, stride, mu = unwrap(target)
    if not eps_u > 0 or (eps_v is not None and not eps_v > 0):
        raise InvalidInput("tolerances must be positive")
    u = spec.vector(u)
    v = spec.vector(v)
    M = spec.truncation
    su, sv = support(u), support(v)
    if max(su, sv) > M // 2:
        raise InvalidInput(f"witness inputs need support <= M/2 = {M // 2}, got {su} and {sv}")
    n = max(1, -(-su // stride))
    while sv + stride * n <= M and (max_time is None or n <= max_time):
        norm = _right_inverse_norm(spec, v, stride * n)
        if norm < eps_u:
            factor = mu ** -n
            if spec.field == "real":
                factor = float(np.real(factor))
            z = u + factor * right_inverse_apply(spec, v, stride * n)
            return ShiftWitness(z=z, n=n, distance_u=norm)
        n += 1
    return None


def iterate_vector(system: System, z: np.ndarray, n: int) -> np.ndarray:
    """Apply a shift-family system ``n`` times to a blocked vector."""
    flat = z.reshape(1, -1)
    for _ in range(n):
        flat = system.step(flat)
    return flat.reshape(z.shape)


def random_vector(spec: WeightedShiftSpec, rng: np.random.Generator, max_support: int) -> np.ndarray:
    """Standard normal entries on a random number of leading blocks."""
    s = int(rng.integers(1, max_support + 1))
    v = spec.zeros()
    vals = rng.standard_normal((s, spec.block_dim))
    if spec.field == "complex":
        vals = vals + 1j * rng.standard_normal((s, spec.block_dim))
    v[:s] = vals
    return v


@dataclass
class BatteryResult:
    passed: bool
    witnesses: list
    max_residual: float
    max_time: int

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "found": sum(w is not None for w in self.witnesses),
            "total": len(self.witnesses),
            "max_residual": self.max_residual,
            "max_time": self.max_time,
            "times": [None if w is None else w.n for w in self.witnesses],
        }


def witness_battery(system: System, pairs, eps_u: float) -> BatteryResult:
    """Construct and re-validate witnesses for every ``(u, v)`` pair."""
    witnesses = []
    residual = 0.0
    for u, v in pairs:
        w = transitivity_witness(system, u, v, eps_u)
        if w is not None:
            image = iterate_vector(system, w.z, w.n)
            residual = max(residual, float(np.linalg.norm(image - v)))
        witnesses.append(w)
    found = [w for w in witnesses if w is not None]
    return BatteryResult(
        passed=len(found) == len(witnesses),
        witnesses=witnesses,
        max_residual=residual,
        max_time=max((w.n for w in found), default=0),
    )


def random_pairs(spec: WeightedShiftSpec, count: int, max_support: int, rng: np.random.Generator):
    return [(random_vector(spec, rng, max_support), random_vector(spec, rng, max_support)) for _ in range(count)]


# -- orbit spans -------------------------------------------------------------


@dataclass
class OrbitSpanBasis:
    basis: np.ndarray
    seeds: list = field(repr=False)
    depth: int = 0

    @property
    def rank(self) -> int:
        return len(self.basis)


def _mgs(vectors, tol: float) -> np.ndarray:
    basis: list[np.ndarray] = []
    for vec in vectors:
        q = vec.astype(np.result_type(vec, np.float64)).copy()
        scale = np.linalg.norm(q)
        if scale == 0:
            continue
        for _ in range(2):
            for b in basis:
                q = q - np.vdot(b, q) * b
        norm = np.linalg.norm(q)
        if norm <= tol * max(1.0, scale):
            continue
        basis.append(q / norm)
    return np.array(basis)


def orbit_span_basis(system: System, seeds, depth: int, tol: float = 1e-10) -> OrbitSpanBasis:
    """Orthonormal basis of ``span{T^j s : s in seeds, 0 <= j <= depth}``."""
    if not system.linear:
        raise InvalidInput("orbit spans need a linear (shift-family) system")
    if depth < 1:
        raise InvalidInput("depth must be >= 1")
    vectors = []
    for s in seeds:
        x = system.point(np.asarray(s).reshape(-1))
        for _ in range(depth + 1):
            vectors.append(x)
            x = system.step(x[None, :])[0]
    basis = _mgs(vectors, tol)
    if basis.size == 0:
        basis = np.zeros((0, system.dim), dtype=system.dtype)
    return OrbitSpanBasis(basis=basis, seeds=list(seeds), depth=depth)


@dataclass
class CompressedOperator:
    matrix: np.ndarray
    defects: np.ndarray

    @property
    def invariance_defect(self) -> float:
        return float(self.defects.max()) if self.defects.size else 0.0


def compressed_operator(system: System, basis: OrbitSpanBasis) -> CompressedOperator:
    """The matrix ``<b_i, T b_j>`` and the per-column leakage ``|(I - P) T b_j|``."""
    B = basis.basis
    if B.shape[0] and B.shape[1] != system.dim:
        raise InvalidInput(f"basis vectors have length {B.shape[1]}, system dimension is {system.dim}")
    if not B.shape[0]:
        return CompressedOperator(np.zeros((0, 0)), np.zeros(0))
    TB = system.step(B)
    matrix = B.conj() @ TB.T
    leak = TB - (matrix.T @ B)
    return CompressedOperator(matrix=matrix, defects=np.linalg.norm(leak, axis=1))
