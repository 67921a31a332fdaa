"""Nested-ball construction of recurrent points whose limit set contains a target.

Each stage ``n`` consists of

* an approach ball ``B(y_n, eps_n)`` whose ``k_n``-th image is enclosed in
  ``B(x, 1/n)``, and
* a return ball ``B(w_n, r_n)`` inside it whose ``m_n``-th image is
  enclosed back in the approach ball,

with ``r_n <= eps_n < 2^-n``, the next approach ball inside the current
return ball, and both time sequences strictly increasing.  The centres
of the nested balls converge to a point ``z`` with ``T^{k_n} z -> x`` and
``T^{m_n} z -> z``.

Indexing: the approach time ``k_n`` belongs to ball ``n`` and targets
radius ``1/n``.  Attaching ``k_{n+1}`` to ball ``n`` with radius
``1/(n+1)`` instead gives the same limit statement.

Containment is decided by centre distance plus a Lipschitz-propagated
radius, with an explicit slack.  No interval arithmetic is involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .serialize import ball_from_json, ball_to_json, point_from_json, point_to_json
from .spaces import SLACK, Ball, EnclosureBlowup, InvalidInput, System, apply_iter, ball_contains, iterate, propagated_radius

SHRINK = 0.9
MAX_CELLS = 4096
# relative improvement below which a cell is not refined further
REL_TOL = 0.05


@dataclass
class StageHit:
    ball: Ball
    time: int
    margin: float


@dataclass
class Stage:
    approach_ball: Ball
    approach_time: int
    approach_margin: float
    return_ball: Ball | None = None
    return_time: int | None = None
    return_margin: float | None = None

    @property
    def innermost(self) -> Ball:
        return self.return_ball if self.return_ball is not None else self.approach_ball


@dataclass
class NestedBallCertificate:
    target: np.ndarray
    initial_ball: Ball
    stages: list[Stage]
    limit_point: np.ndarray

    @property
    def depth(self) -> int:
        return len(self.stages)

    @property
    def recurrent(self) -> bool:
        return all(s.return_ball is not None for s in self.stages)

    def to_json(self) -> dict:
        stages = []
        for s in self.stages:
            entry = {"approach": {**ball_to_json(s.approach_ball), "time": s.approach_time, "margin": s.approach_margin}}
            entry["return"] = None
            if s.return_ball is not None:
                entry["return"] = {**ball_to_json(s.return_ball), "time": s.return_time, "margin": s.return_margin}
            stages.append(entry)
        return {
            "target": point_to_json(self.target),
            "initial_ball": ball_to_json(self.initial_ball),
            "stages": stages,
            "limit_point": point_to_json(self.limit_point),
            "depth": self.depth,
        }

    @classmethod
    def from_json(cls, data: dict) -> "NestedBallCertificate":
        try:
            stages = []
            for s in data["stages"]:
                a, r = s["approach"], s.get("return")
                stage = Stage(ball_from_json(a), int(a["time"]), float(a["margin"]))
                if r is not None:
                    stage.return_ball = ball_from_json(r)
                    stage.return_time = int(r["time"])
                    stage.return_margin = float(r["margin"])
                stages.append(stage)
            cert = cls(
                target=point_from_json(data["target"]),
                initial_ball=ball_from_json(data["initial_ball"]),
                stages=stages,
                limit_point=point_from_json(data["limit_point"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInput(f"malformed certificate: {exc}") from exc
        if "depth" in data and int(data["depth"]) != cert.depth:
            raise InvalidInput(f"certificate declares depth {data['depth']} but has {cert.depth} stages")
        return cert


@dataclass
class ConstructionOutcome:
    """Result of :func:`construct_recurrent_point`; ``certificate`` is None on failure."""

    certificate: NestedBallCertificate | None
    stages: list[Stage] = field(default_factory=list)
    failed_stage: int | None = None
    failed_kind: str | None = None

    @property
    def ok(self) -> bool:
        return self.certificate is not None


# -- stage search ------------------------------------------------------------


def _div(num: np.ndarray, Lt: float) -> np.ndarray:
    if Lt > 0:
        return num / Lt
    return np.where(num > 0, np.inf, -1.0)


def _root_cell(system: System, B: Ball) -> tuple[np.ndarray, float]:
    c = B.center.astype(np.float64)
    if system.space == "interval":
        lo, hi = max(0.0, c[0] - B.radius), min(1.0, c[0] + B.radius)
        return np.array([[0.5 * (lo + hi)]]), 0.5 * (hi - lo)
    return c[None, :], B.radius


def _children(centers: np.ndarray, h: float) -> np.ndarray:
    dim = centers.shape[1]
    signs = np.array(np.meshgrid(*([[-1.0, 1.0]] * dim), indexing="ij")).reshape(dim, -1).T
    out = centers[:, None, :] + 0.5 * h * signs[None, :, :]
    return out.reshape(-1, dim)


def _refine(system, B, target, t, Lt, cap, shrink, max_cells, h_floor):
    """Best centre at time ``t``: largest admissible radius, earliest cell on ties."""
    centers, h = _root_cell(system, B)
    cell_r = math.sqrt(system.dim)
    best_rad, best_c, best_d = 0.0, None, None
    while True:
        centers = system.wrap(centers)
        s = h * cell_r
        img = iterate(system, centers, t)
        dc = system.distance(centers, B.center[None, :])
        dimg = system.distance(img, target.center[None, :])
        with np.errstate(over="ignore"):
            rad = shrink * np.minimum(np.minimum(B.radius - dc, _div(target.radius - dimg, Lt)), cap)
            ub = shrink * np.minimum(
                np.minimum(B.radius - np.maximum(0.0, dc - s), _div(target.radius - np.maximum(0.0, dimg - s * Lt), Lt)),
                cap,
            )
        ok = system.in_domain(centers) & (rad > 0)
        if ok.any():
            i = int(np.flatnonzero(ok)[np.argmax(rad[ok])])
            if rad[i] > best_rad:
                best_rad, best_c, best_d = float(rad[i]), centers[i].copy(), float(dimg[i])
        keep = (ub > best_rad * (1.0 + REL_TOL)) & (ub > 0)
        if not keep.any() or h / 2 < h_floor:
            break
        idx = np.flatnonzero(keep)
        if idx.size > max_cells:
            order = np.argsort(-ub[idx], kind="stable")[:max_cells]
            idx = np.sort(idx[order])
        centers = _children(centers[idx], h)
        h /= 2
    if best_c is None:
        return None
    margin = target.radius - (best_d + best_rad * Lt)
    return StageHit(Ball(best_c, best_rad), t, float(margin))


def _stage_search(system, B, target, min_time, budget, cap, shrink=SHRINK, max_cells=MAX_CELLS) -> StageHit | None:
    if system.dtype is np.complex128:
        raise InvalidInput("nested-ball construction needs a real coordinate space")
    if min_time < 0 or budget < 1:
        raise InvalidInput("min_time must be >= 0 and budget >= 1")
    L = system.lipschitz
    h_floor = 16 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(B.center))))
    root = iterate(system, B.center[None, :].astype(np.float64), min_time)
    for t in range(min_time + 1, budget + 1):
        root = system.step(root)
        if L > 1.0 and t * math.log(L) > math.log(target.radius / h_floor):
            # cells cannot get fine enough at this or any later time
            break
        Lt = L**t if L != 1.0 else 1.0
        if float(system.distance(root[0], target.center)) - B.radius * Lt >= target.radius:
            continue
        hit = _refine(system, B, target, t, Lt, cap, shrink, max_cells, h_floor)
        if hit is not None:
            return hit
    return None


def find_approach_stage(system: System, B: Ball, x, rho: float, budget: int, min_time: int = 0, cap: float = math.inf, shrink: float = SHRINK) -> StageHit | None:
    """A sub-ball of ``B`` whose ``k``-th image is enclosed in ``B(x, rho)``, ``k > min_time`` minimal."""
    if not rho > 0:
        raise InvalidInput("rho must be positive")
    return _stage_search(system, B, Ball(system.point(x), rho), min_time, budget, cap, shrink)


def find_return_stage(system: System, B: Ball, budget: int, min_time: int = 0, cap: float = math.inf, shrink: float = SHRINK) -> StageHit | None:
    """A sub-ball of ``B`` whose ``m``-th image is enclosed in ``B`` itself, ``m > min_time`` minimal."""
    return _stage_search(system, B, B, min_time, budget, cap, shrink)


def construct_recurrent_point(system: System, x, B0: Ball, depth: int, budget: int, *, recurrent: bool = True, shrink: float = SHRINK) -> ConstructionOutcome:
    """Run the nested-ball induction for ``depth`` stages.

    With ``recurrent=False`` the return stages are skipped and the result
    only certifies that ``x`` lies in the limit set of the limit point.
    """
    if depth < 1:
        raise InvalidInput("depth must be >= 1")
    x = system.point(x)
    B0 = Ball(system.point(B0.center), B0.radius)
    ball, k_prev, m_prev = B0, 0, 0
    stages: list[Stage] = []
    for n in range(1, depth + 1):
        cap = 2.0**-n
        a = find_approach_stage(system, ball, x, 1.0 / n, budget, k_prev, cap, shrink)
        if a is None:
            return ConstructionOutcome(None, stages, n, "approach")
        stage = Stage(a.ball, a.time, a.margin)
        k_prev = a.time
        ball = a.ball
        if recurrent:
            r = find_return_stage(system, a.ball, budget, m_prev, cap, shrink)
            if r is None:
                stages.append(stage)
                return ConstructionOutcome(None, stages, n, "return")
            stage.return_ball, stage.return_time, stage.return_margin = r.ball, r.time, r.margin
            m_prev = r.time
            ball = r.ball
        stages.append(stage)
    cert = NestedBallCertificate(target=x, initial_ball=B0, stages=stages, limit_point=ball.center.copy())
    return ConstructionOutcome(cert, stages)


# -- verification ------------------------------------------------------------


@dataclass
class Check:
    name: str
    stage: int | None
    passed: bool
    margin: float

    def to_dict(self) -> dict:
        return {"name": self.name, "stage": self.stage, "passed": self.passed, "margin": self.margin}


@dataclass
class VerificationReport:
    checks: list[Check]

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    def failed(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks]}


def _enclosure_margin(system, inner: Ball, time: int, outer: Ball) -> float:
    """Clearance of the enclosure of ``T^time(inner)`` inside ``outer``."""
    try:
        radius = propagated_radius(system, inner.radius, time)
    except EnclosureBlowup:
        return -math.inf
    image_center = apply_iter(system, inner.center, time)
    return outer.radius - (float(system.distance(image_center, outer.center)) + radius)


def verify_certificate(system: System, cert: NestedBallCertificate, slack: float = SLACK) -> VerificationReport:
    """Re-check every stage of a certificate from the system and certificate alone."""
    checks: list[Check] = []

    def add(name, stage, margin, strict=False):
        ok = margin > 0 if strict else margin >= -slack
        checks.append(Check(name, stage, bool(ok), float(margin)))

    x = cert.target
    z = cert.limit_point
    outer = cert.initial_ball
    k_prev = m_prev = 0
    for n, s in enumerate(cert.stages, start=1):
        bound = 2.0**-n
        add("approach-radius-bound", n, bound - s.approach_ball.radius, strict=True)
        add("approach-nested", n, ball_contains(system, outer, s.approach_ball)[1])
        add("approach-time-increasing", n, s.approach_time - k_prev, strict=True)
        add("approach-enclosure", n, _enclosure_margin(system, s.approach_ball, s.approach_time, Ball(x, 1.0 / n)))
        add("limit-point-in-approach", n, s.approach_ball.radius - float(system.distance(z, s.approach_ball.center)), strict=True)
        fz = apply_iter(system, z, s.approach_time)
        add("empirical-approach", n, 1.0 / n + slack - float(system.distance(fz, x)))
        k_prev = s.approach_time
        outer = s.approach_ball
        if s.return_ball is not None:
            add("return-radius-bound", n, min(bound, s.approach_ball.radius) - s.return_ball.radius)
            add("return-nested", n, ball_contains(system, s.approach_ball, s.return_ball)[1])
            add("return-time-increasing", n, s.return_time - m_prev, strict=True)
            add("return-enclosure", n, _enclosure_margin(system, s.return_ball, s.return_time, s.approach_ball))
            add("limit-point-in-return", n, s.return_ball.radius - float(system.distance(z, s.return_ball.center)) + slack)
            rz = apply_iter(system, z, s.return_time)
            add("empirical-return", n, 2.0 ** (1 - n) + slack - float(system.distance(rz, z)))
            m_prev = s.return_time
            outer = s.return_ball
    return VerificationReport(checks)
