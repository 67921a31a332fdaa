"""Metric spaces, self-maps and the catalogue of desk-scale systems.

Points are plain 1-D numpy arrays; batches of points are 2-D arrays of
shape ``(count, dim)``.  A :class:`System` owns its metric, its domain
check and a per-application Lipschitz constant, which is what the ball
enclosures downstream rely on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SLACK = 1e-12
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

# radius * L**n above this is reported instead of propagated
_BLOWUP = 1e300


class InvalidInput(ValueError):
    """Raised when an argument violates an operation's precondition."""


class EnclosureBlowup(ArithmeticError):
    """Raised when a propagated enclosure radius overflows."""


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        center = np.atleast_1d(np.asarray(self.center))
        if center.ndim != 1:
            raise InvalidInput("ball center must be a 1-D point")
        radius = float(self.radius)
        if not (radius > 0.0 and math.isfinite(radius)):
            raise InvalidInput(f"ball radius must be positive and finite, got {self.radius!r}")
        center.setflags(write=False)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", radius)

    def __eq__(self, other):
        if not isinstance(other, Ball):
            return NotImplemented
        return self.radius == other.radius and np.array_equal(self.center, other.center)

    def __hash__(self):
        return hash((self.center.tobytes(), self.radius))

    def __repr__(self):
        if self.center.size == 1:
            return f"Ball({self.center[0].item()!r}, {self.radius!r})"
        return f"Ball(<dim {self.center.size}>, {self.radius!r})"


class System:
    """A continuous self-map of a complete metric space.

    Subclasses implement :meth:`step` on batches.  ``space`` is one of
    ``"circle"``, ``"interval"`` or ``"euclidean"``.
    """

    kind = "abstract"
    space = "euclidean"
    dim = 1
    lipschitz = 1.0
    linear = False
    dtype = np.float64

    def step(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def describe(self) -> dict:
        return {"id": self.kind, **self.params()}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"

    # -- metric -----------------------------------------------------------

    def distance(self, a, b) -> np.ndarray:
        """Distance between (batches of) points, broadcasting leading axes."""
        a = np.asarray(a)
        b = np.asarray(b)
        if self.space == "circle":
            d = np.abs(a[..., 0] - b[..., 0]) % 1.0
            return np.minimum(d, 1.0 - d)
        if self.space == "interval":
            return np.abs(a[..., 0] - b[..., 0])
        return np.linalg.norm(a - b, axis=-1)

    # -- domain -----------------------------------------------------------

    def in_domain(self, pts) -> np.ndarray:
        pts = np.asarray(pts)
        ok = np.all(np.isfinite(pts), axis=-1)
        if self.space == "circle":
            ok &= (pts[..., 0] >= 0.0) & (pts[..., 0] < 1.0)
        elif self.space == "interval":
            ok &= (pts[..., 0] >= 0.0) & (pts[..., 0] <= 1.0)
        return ok

    def point(self, x) -> np.ndarray:
        """Coerce ``x`` to a validated point of this system."""
        arr = np.atleast_1d(np.asarray(x))
        if arr.ndim != 1 or arr.size != self.dim:
            raise InvalidInput(f"{self.kind}: expected a point of dimension {self.dim}, got shape {arr.shape}")
        if np.iscomplexobj(arr) and self.dtype is not np.complex128:
            if np.any(arr.imag != 0):
                raise InvalidInput(f"{self.kind}: complex coordinates on a real space")
            arr = arr.real
        arr = arr.astype(self.dtype)
        if not self.in_domain(arr):
            raise InvalidInput(f"{self.kind}: point {arr.tolist()!r} outside the {self.space} domain")
        return arr

    def ball(self, center, radius) -> Ball:
        return Ball(self.point(center), radius)

    def wrap(self, pts: np.ndarray) -> np.ndarray:
        """Map coordinates back into the canonical chart (circle only)."""
        if self.space != "circle":
            return pts
        out = np.mod(pts, 1.0)
        return np.where(out >= 1.0, 0.0, out)


# -- catalogue ---------------------------------------------------------------


class Doubling(System):
    kind = "doubling"
    space = "circle"
    lipschitz = 2.0

    def step(self, pts):
        return self.wrap(2.0 * pts)


@dataclass(frozen=True, repr=False)
class Rotation(System):
    alpha: float = GOLDEN

    kind = "rotation"
    space = "circle"
    lipschitz = 1.0

    def __post_init__(self):
        object.__setattr__(self, "alpha", float(self.alpha) % 1.0)

    def step(self, pts):
        return self.wrap(pts + self.alpha)

    def params(self):
        return {"alpha": self.alpha}


class Tent(System):
    kind = "tent"
    space = "interval"
    lipschitz = 2.0

    def step(self, pts):
        return 1.0 - np.abs(2.0 * pts - 1.0)


@dataclass(frozen=True, repr=False)
class Contraction(System):
    c: float = 0.5

    kind = "contraction"
    space = "interval"

    def __post_init__(self):
        if not 0.0 < self.c < 1.0:
            raise InvalidInput(f"contraction factor must lie in (0, 1), got {self.c!r}")
        object.__setattr__(self, "c", float(self.c))

    @property
    def lipschitz(self):
        return self.c

    def step(self, pts):
        return self.c * pts

    def params(self):
        return {"c": self.c}


class Interchange(System):
    """Continuous piecewise-linear map of [0, 1] swapping the two halves.

    ``[0, 1/2]`` is folded onto ``[1/2, 1]`` with slope 2 and ``[1/2, 1]``
    is reflected back by ``x -> 1 - x``.  The map is transitive, while its
    square leaves both halves invariant, so the square is not.
    """

    kind = "interchange"
    space = "interval"
    lipschitz = 2.0

    def step(self, pts):
        return np.where(
            pts <= 0.25,
            2.0 * pts + 0.5,
            np.where(pts <= 0.5, 1.5 - 2.0 * pts, 1.0 - pts),
        )


# -- wrappers ----------------------------------------------------------------


class PowerSystem(System):
    """One application equals ``p`` applications of ``base``."""

    kind = "power"

    def __init__(self, base: System, p: int):
        if int(p) != p or p < 1:
            raise InvalidInput(f"power must be a positive integer, got {p!r}")
        self.base = base
        self.p = int(p)
        self.space = base.space
        self.dim = base.dim
        self.dtype = base.dtype
        self.linear = base.linear
        self.lipschitz = base.lipschitz ** self.p

    def step(self, pts):
        for _ in range(self.p):
            pts = self.base.step(pts)
        return pts

    def distance(self, a, b):
        return self.base.distance(a, b)

    def in_domain(self, pts):
        return self.base.in_domain(pts)

    def params(self):
        return {"p": self.p, "base": self.base.describe()}


class ScaledSystem(System):
    """One application equals ``lam * base``; only meaningful for linear bases."""

    kind = "scalar"

    def __init__(self, base: System, lam: complex):
        self.base = base
        lam = complex(lam)
        self.lam = lam.real if lam.imag == 0 else lam
        self.space = base.space
        self.dim = base.dim
        self.dtype = base.dtype
        self.linear = True
        self.lipschitz = abs(lam) * base.lipschitz

    def step(self, pts):
        return self.lam * self.base.step(pts)

    def distance(self, a, b):
        return self.base.distance(a, b)

    def in_domain(self, pts):
        return self.base.in_domain(pts)

    def params(self):
        lam = complex(self.lam)
        return {"lambda": [lam.real, lam.imag], "base": self.base.describe()}


# -- sampling ----------------------------------------------------------------


@dataclass
class SeededSampler:
    """Counter-based source of independent numpy generators.

    ``generator(key)`` depends only on ``(seed, key)``, so work split across
    threads draws the same numbers whatever the schedule.
    """

    seed: int = 0
    counter: int = field(default=0)

    def __post_init__(self):
        self.seed = int(self.seed) & 0xFFFF_FFFF_FFFF_FFFF

    def generator(self, *key: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=tuple(int(k) for k in key)))

    def next_generator(self) -> np.random.Generator:
        gen = self.generator(self.counter)
        self.counter += 1
        return gen


def _ball_offsets(rng: np.random.Generator, count: int, dim: int, radius: float, complex_: bool) -> np.ndarray:
    if dim == 1 and not complex_:
        off = radius * (2.0 * rng.random(count) - 1.0)
        off[np.abs(off) >= radius] = 0.0
        return off[:, None]
    real_dim = 2 * dim if complex_ else dim
    g = rng.standard_normal((count, real_dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    g *= (radius * rng.random(count) ** (1.0 / real_dim))[:, None]
    if complex_:
        g = g[:, :dim] + 1j * g[:, dim:]
    return g


def sample_ball(system: System, b: Ball, count: int, sampler: SeededSampler, rng: np.random.Generator | None = None) -> np.ndarray:
    """Draw ``count`` points at distance < ``b.radius`` from ``b.center``."""
    if count < 1:
        raise InvalidInput("count must be >= 1")
    rng = sampler.next_generator() if rng is None else rng
    off = _ball_offsets(rng, count, system.dim, b.radius, system.dtype is np.complex128)
    pts = b.center[None, :] + off
    if system.space == "circle":
        pts = system.wrap(pts)
    elif system.space == "interval":
        pts = np.clip(pts, 0.0, 1.0)
    return pts


# -- iteration ---------------------------------------------------------------


def iterate(system: System, pts: np.ndarray, n: int) -> np.ndarray:
    """Apply the map ``n`` times to a batch without validation."""
    for _ in range(n):
        pts = system.step(pts)
    return pts


def apply_iter(system: System, x, n: int) -> np.ndarray:
    """Return ``T^n x``."""
    if int(n) != n or n < 0:
        raise InvalidInput(f"iteration count must be a non-negative integer, got {n!r}")
    x = system.point(x)
    return iterate(system, x[None, :], int(n))[0]


def propagated_radius(system: System, radius: float, n: int) -> float:
    """``radius * L**n``, raising :class:`EnclosureBlowup` on overflow."""
    L = system.lipschitz
    if L == 0.0:
        return 0.0 if n > 0 else radius
    if n == 0 or L == 1.0:
        return radius
    log_r = math.log(radius) + n * math.log(L)
    if log_r > math.log(_BLOWUP):
        raise EnclosureBlowup(f"enclosure-blowup: radius {radius:g} * {L:g}^{n} exceeds {_BLOWUP:g}")
    # direct product when L**n is representable, so exact cases stay exact
    if abs(n * math.log(L)) < 700.0:
        return radius * L**n
    return math.exp(log_r)


def enclose_image(system: System, b: Ball, n: int) -> Ball:
    """A ball guaranteed to contain ``T^n(b)`` given a valid Lipschitz constant."""
    center = apply_iter(system, b.center, n)
    return Ball(center, propagated_radius(system, b.radius, n))


def ball_contains(system: System, outer: Ball, inner: Ball, slack: float = SLACK) -> tuple[bool, float]:
    """Containment of ``inner`` in ``outer`` plus the clearance that decided it."""
    clearance = outer.radius - (float(system.distance(inner.center, outer.center)) + inner.radius)
    return clearance >= -slack, clearance
