"""Finite-horizon witnesses for orbits, limit sets, J-sets and transitivity.

Every search here is a semi-decision: a witness is evidence of
membership, while "no witness within budget" is never read as a proof
of non-membership.
"""

from __future__ import annotations

import bisect
import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .shifts import is_shift_family, iterate_vector, random_vector, transitivity_witness, unwrap
from .spaces import Ball, InvalidInput, SeededSampler, System, apply_iter, sample_ball

NO_HIT = "no-hit-up-to-horizon"
HIT = "hit"


@dataclass
class WitnessTimes:
    times: list[int]
    achieved_distances: list[float]

    def to_dict(self) -> dict:
        return {"times": self.times, "achieved_distances": self.achieved_distances}


@dataclass
class JWitness:
    start_point: np.ndarray
    time: int
    start_distance: float
    end_distance: float
    sample_index: int = 0


def orbit_segment(system: System, x, N: int) -> np.ndarray:
    """``[x, Tx, ..., T^N x]`` as an ``(N + 1, dim)`` array."""
    if N < 0:
        raise InvalidInput("N must be >= 0")
    pt = system.point(x)[None, :]
    out = np.empty((N + 1, system.dim), dtype=system.dtype)
    out[0] = pt[0]
    for n in range(1, N + 1):
        pt = system.step(pt)
        out[n] = pt[0]
    return out


def limit_witness(system: System, x, y, eps: float, N: int, min_count: int = 3) -> WitnessTimes | None:
    """All times ``1 <= n <= N`` with ``d(T^n x, y) < eps``, if there are at least ``min_count``."""
    if not eps > 0 or N < 1:
        raise InvalidInput("eps must be positive and N >= 1")
    orbit = orbit_segment(system, x, N)[1:]
    d = system.distance(orbit, system.point(y)[None, :])
    idx = np.flatnonzero(d < eps)
    if idx.size < min_count:
        return None
    return WitnessTimes(times=[int(i) + 1 for i in idx], achieved_distances=[float(v) for v in d[idx]])


def recurrence_witness(system: System, x, eps: float, N: int, min_count: int = 3) -> WitnessTimes | None:
    return limit_witness(system, x, x, eps, N, min_count)


def jset_witness(system: System, x, y, eps: float, delta: float, N: int, samples: int, sampler: SeededSampler) -> JWitness | None:
    """Search ``B(x, delta)`` (``x`` itself first) for ``x'`` with ``T^k x'`` within ``eps`` of ``y``.

    The smallest ``k`` wins; among equal ``k`` the lowest sample index.
    """
    if not (eps > 0 and delta > 0) or N < 1 or samples < 1:
        raise InvalidInput("eps, delta must be positive; N, samples >= 1")
    x = system.point(x)
    y = system.point(y)
    pts = np.vstack([x[None, :], sample_ball(system, Ball(x, delta), samples, sampler)])
    cur = pts
    for k in range(1, N + 1):
        cur = system.step(cur)
        d = system.distance(cur, y[None, :])
        hits = np.flatnonzero(d < eps)
        if hits.size:
            i = int(hits[0])
            return JWitness(
                start_point=pts[i],
                time=k,
                start_distance=float(system.distance(pts[i], x)),
                end_distance=float(d[i]),
                sample_index=i,
            )
    return None


# -- scans -------------------------------------------------------------------


@dataclass
class PairVerdict:
    verdict: str
    time: int | None = None
    witness: np.ndarray | None = field(default=None, repr=False)
    direction: str | None = None
    min_distance: float | None = None

    @property
    def hit(self) -> bool:
        return self.verdict == HIT


@dataclass
class ScanReport:
    mode: str
    horizon: int
    resolution: float | None
    pairs: list[tuple[Ball, Ball]] = field(repr=False)
    verdicts: list[PairVerdict] = field(repr=False)
    witness_mode: bool = False

    @property
    def passed(self) -> bool:
        return all(v.hit for v in self.verdicts)

    @property
    def hit_count(self) -> int:
        return sum(v.hit for v in self.verdicts)

    @property
    def max_hit_time(self) -> int | None:
        times = [v.time for v in self.verdicts if v.hit]
        return max(times) if times else None

    def failures(self) -> list[int]:
        return [i for i, v in enumerate(self.verdicts) if not v.hit]

    def strongest_failure(self) -> int | None:
        """Index of the failing pair whose orbits stayed farthest from the target."""
        fails = self.failures()
        if not fails:
            return None
        return max(fails, key=lambda i: (self.verdicts[i].min_distance, -i))

    def to_dict(self) -> dict:
        from .serialize import ball_to_json, point_to_json

        rows = []
        for (U, V), v in zip(self.pairs, self.verdicts):
            rows.append(
                {
                    "U": ball_to_json(U),
                    "V": ball_to_json(V),
                    "verdict": v.verdict,
                    "time": v.time,
                    "direction": v.direction,
                    "witness": None if v.witness is None else point_to_json(v.witness),
                    "min_distance": v.min_distance,
                }
            )
        return {
            "mode": self.mode,
            "horizon": self.horizon,
            "resolution": self.resolution,
            "witness_mode": self.witness_mode,
            "passed": self.passed,
            "hits": self.hit_count,
            "total": len(self.verdicts),
            "max_hit_time": self.max_hit_time,
            "pairs": rows,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["pair", "u_center", "u_radius", "v_center", "v_radius", "verdict", "time", "direction", "min_distance"])
        for i, ((U, V), v) in enumerate(zip(self.pairs, self.verdicts)):
            w.writerow(
                [
                    i,
                    _coords(U.center),
                    repr(U.radius),
                    _coords(V.center),
                    repr(V.radius),
                    v.verdict,
                    "" if v.time is None else v.time,
                    v.direction or "",
                    "" if v.min_distance is None else repr(v.min_distance),
                ]
            )
        return buf.getvalue()


def _coords(c) -> str:
    if c.size == 1 and not np.iscomplexobj(c):
        return repr(float(c[0]))
    return f"<dim {c.size}>"


def grid_balls(system: System, g: float) -> list[Ball]:
    """Balls of radius ``g/2`` centred on the lattice ``g/2 + k g`` inside ``[0, 1]``."""
    if system.dim != 1 or system.space not in ("circle", "interval"):
        raise InvalidInput("grid scans need a one-dimensional circle or interval system")
    count = int(round(1.0 / g))
    if count < 1 or abs(count * g - 1.0) > 1e-9:
        raise InvalidInput(f"grid spacing must divide 1, got {g!r}")
    return [Ball(np.array([g / 2 + k * g]), g / 2) for k in range(count)]


def grid_pairs(system: System, g: float) -> list[tuple[Ball, Ball]]:
    balls = grid_balls(system, g)
    return [(U, V) for U in balls for V in balls]


def shift_battery(system: System, count: int, radius: float, sampler: SeededSampler, max_support: int | None = None) -> list[tuple[Ball, Ball]]:
    """Seeded pairs of finitely supported ball centres for shift-family scans."""
    spec, _, _ = unwrap(system)
    max_support = max_support or max(1, spec.truncation // 8)
    rng = sampler.generator(0xBA77E7)
    pairs = []
    for _ in range(count):
        u = random_vector(spec, rng, max_support).reshape(-1)
        v = random_vector(spec, rng, max_support).reshape(-1)
        pairs.append((Ball(u, radius), Ball(v, radius)))
    return pairs


def _first_hit(system: System, pts: np.ndarray, V: Ball, N: int) -> tuple[int | None, int | None, float]:
    cur = pts
    best = np.inf
    target = V.center[None, :]
    for n in range(N + 1):
        if n:
            cur = system.step(cur)
        d = system.distance(cur, target)
        best = min(best, float(d.min()))
        hits = np.flatnonzero(d < V.radius)
        if hits.size:
            return n, int(hits[0]), best
    return None, None, best


def _sampled_direction(system, U, V, N, samples, rng) -> PairVerdict:
    pts = np.vstack([U.center[None, :], sample_ball(system, U, samples, None, rng=rng)])
    n, i, best = _first_hit(system, pts, V, N)
    if n is None:
        return PairVerdict(NO_HIT, min_distance=best)
    witness = pts[i]
    # re-validate through the public iteration path
    if not system.distance(apply_iter(system, witness, n), V.center) < V.radius:
        raise RuntimeError(f"hit at n={n} failed re-validation")
    return PairVerdict(HIT, time=n, witness=witness, min_distance=best)


def _witness_direction(system, U, V, N) -> PairVerdict:
    spec, _, _ = unwrap(system)
    d0 = float(system.distance(U.center, V.center))
    if d0 < V.radius:
        return PairVerdict(HIT, time=0, witness=U.center.copy(), min_distance=d0)
    u = spec.vector(U.center)
    v = spec.vector(V.center)
    w = transitivity_witness(system, u, v, U.radius, V.radius, max_time=N)
    if w is None:
        orbit = U.center[None, :]
        best = d0
        for _ in range(N):
            orbit = system.step(orbit)
            best = min(best, float(system.distance(orbit[0], V.center)))
        return PairVerdict(NO_HIT, min_distance=best)
    image = iterate_vector(system, w.z, w.n).reshape(-1)
    dist = float(system.distance(image, V.center))
    if not (dist < V.radius and w.distance_u < U.radius):
        raise RuntimeError(f"shift witness at n={w.n} failed re-validation")
    return PairVerdict(HIT, time=w.n, witness=w.z.reshape(-1), min_distance=dist)


def _scan_pair(system, U, V, N, samples, sampler, index, mode, witness_mode) -> PairVerdict:
    if witness_mode:
        forward = _witness_direction(system, U, V, N)
    else:
        forward = _sampled_direction(system, U, V, N, samples, sampler.generator(index, 0))
    if forward.hit or mode == "transitive":
        if forward.hit and mode == "almost-transitive":
            forward.direction = "forward"
        return forward
    if witness_mode:
        backward = _witness_direction(system, V, U, N)
    else:
        backward = _sampled_direction(system, V, U, N, samples, sampler.generator(index, 1))
    if backward.hit:
        backward.direction = "backward"
        return backward
    return PairVerdict(NO_HIT, min_distance=min(forward.min_distance, backward.min_distance))


def _scan(system, pairs, grid, N, samples, sampler, jobs, mode) -> ScanReport:
    if N < 1:
        raise InvalidInput("horizon must be >= 1")
    sampler = sampler or SeededSampler(0)
    witness_mode = is_shift_family(system)
    if pairs is None:
        if grid is None:
            raise InvalidInput("either pairs or a grid resolution is required")
        if witness_mode:
            pairs = shift_battery(system, int(round(1.0 / grid)), grid, sampler)
        else:
            pairs = grid_pairs(system, grid)
    pairs = [(Ball(system.point(U.center), U.radius), Ball(system.point(V.center), V.radius)) for U, V in pairs]

    def work(i):
        U, V = pairs[i]
        return _scan_pair(system, U, V, N, samples, sampler, i, mode, witness_mode)

    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            verdicts = list(pool.map(work, range(len(pairs))))
    else:
        verdicts = [work(i) for i in range(len(pairs))]
    return ScanReport(mode=mode, horizon=N, resolution=grid, pairs=pairs, verdicts=verdicts, witness_mode=witness_mode)


def transitivity_scan(system: System, pairs=None, *, grid: float | None = None, N: int, samples: int = 256, sampler: SeededSampler | None = None, jobs: int = 1) -> ScanReport:
    """Look for ``n <= N`` and ``u`` in ``U`` with ``T^n u`` in ``V`` for every pair.

    Shift-family systems use the exact right-inverse witness instead of
    sampling.
    """
    return _scan(system, pairs, grid, N, samples, sampler, jobs, "transitive")


def almost_transitivity_scan(system: System, pairs=None, *, grid: float | None = None, N: int, samples: int = 256, sampler: SeededSampler | None = None, jobs: int = 1) -> ScanReport:
    """As :func:`transitivity_scan`, but a pair also passes when ``V`` reaches ``U``."""
    return _scan(system, pairs, grid, N, samples, sampler, jobs, "almost-transitive")


# -- G-delta membership ------------------------------------------------------


@dataclass
class GdeltaResult:
    member: bool
    evidence: dict = field(repr=False)
    missing: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "member": self.member,
            "evidence": [[s, n, m] for (s, n), m in sorted(self.evidence.items())],
            "missing": [list(k) for k in self.missing],
        }


def gdelta_check(system: System, z, x, S: int, N: int, M: int) -> GdeltaResult:
    """Truncated membership test for the set of points whose limit set contains ``x``.

    True iff for every ``s <= S`` and ``n <= N`` some ``n < m <= M`` has
    ``d(T^m z, x) < 1/s``.  Preimages are not computable, so membership in
    ``T^-m B(x, 1/s)`` is read off the forward orbit of ``z``.
    """
    if S < 1 or N < 1 or M <= N:
        raise InvalidInput("need S, N >= 1 and M > N")
    orbit = orbit_segment(system, z, M)
    d = system.distance(orbit, system.point(x)[None, :])
    evidence, missing = {}, []
    for s in range(1, S + 1):
        good = np.flatnonzero(d < 1.0 / s).tolist()
        for n in range(1, N + 1):
            k = bisect.bisect_right(good, n)
            if k < len(good):
                evidence[(s, n)] = int(good[k])
            else:
                missing.append((s, n))
    return GdeltaResult(member=not missing, evidence=evidence, missing=missing)
