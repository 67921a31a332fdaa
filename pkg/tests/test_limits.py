import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from translab.limits import (
    HIT,
    NO_HIT,
    almost_transitivity_scan,
    gdelta_check,
    grid_balls,
    jset_witness,
    limit_witness,
    orbit_segment,
    recurrence_witness,
    transitivity_scan,
)
from translab.spaces import GOLDEN, Ball, Contraction, Doubling, InvalidInput, Rotation, SeededSampler, Tent, apply_iter


def B(c, r):
    return Ball(np.array([float(c)]), r)


def circ(a, b):
    d = abs(a - b) % 1.0
    return min(d, 1.0 - d)


# -- orbits ---------------------------------------------------------------------


def test_contraction_orbit():
    assert orbit_segment(Contraction(0.5), 0.8, 2)[:, 0].tolist() == pytest.approx([0.8, 0.4, 0.2])


def test_doubling_period_two_orbit():
    orbit = orbit_segment(Doubling(), 1 / 3, 3)[:, 0]
    assert orbit == pytest.approx([1 / 3, 2 / 3, 1 / 3, 2 / 3], abs=1e-15)


def test_zero_length_orbit():
    assert orbit_segment(Tent(), 0.3, 0).tolist() == [[0.3]]


# -- limit sets -----------------------------------------------------------------


def test_rotation_returns_to_zero():
    w = limit_witness(Rotation(), 0.0, 0.0, 0.05, 10_000)
    assert w is not None
    # oracle: exact rational arithmetic on the stored alpha
    alpha = Fraction(GOLDEN)
    expected = [n for n in range(1, 10_001) if float(min((n * alpha) % 1, 1 - (n * alpha) % 1)) < 0.05]
    assert w.times == expected
    assert all(d < 0.05 for d in w.achieved_distances)


def test_contraction_has_no_limit_witness():
    assert limit_witness(Contraction(0.5), 0.8, 0.5, 0.01, 10_000) is None


def test_doubling_third_limit_times():
    w = limit_witness(Doubling(), 1 / 3, 1 / 3, 0.001, 100)
    assert w is not None
    # float orbits of the doubling map drift after ~40 steps, so only the early times are exact
    assert w.times[:20] == list(range(2, 42, 2))
    assert w.times == sorted(set(w.times))


def test_limit_witness_validates_arguments():
    with pytest.raises(InvalidInput):
        limit_witness(Doubling(), 0.1, 0.1, 0.0, 10)
    with pytest.raises(InvalidInput):
        limit_witness(Doubling(), 0.1, 0.1, 0.1, 0)


def test_rotation_points_are_recurrent():
    for x in (0.0, 0.3, 0.77):
        assert recurrence_witness(Rotation(), x, 0.05, 10_000) is not None


def test_contraction_point_not_recurrent_within_horizon():
    assert recurrence_witness(Contraction(0.5), 0.8, 0.01, 10_000) is None


def test_identity_rotation_recurs_every_step():
    w = recurrence_witness(Rotation(0.0), 0.4, 1e-9, 3)
    assert w.times == [1, 2, 3]


# -- J sets ---------------------------------------------------------------------


def test_contraction_jset_uses_the_point_itself():
    w = jset_witness(Contraction(0.5), 0.8, 0.0, 0.01, 0.1, 20, 10, SeededSampler(0))
    assert w.sample_index == 0
    assert w.start_distance == 0.0
    assert w.time == 7  # 0.8 / 2^7 < 0.01 <= 0.8 / 2^6
    assert w.end_distance < 0.01


def test_doubling_jset_witness():
    D = Doubling()
    w = jset_witness(D, 0.2, 0.7, 0.01, 0.01, 60, 10_000, SeededSampler(1))
    assert w is not None
    assert float(D.distance(w.start_point, np.array([0.2]))) <= 0.01
    assert float(D.distance(apply_iter(D, w.start_point, w.time), np.array([0.7]))) <= 0.01
    assert 1 <= w.time <= 60


def test_rotation_jset_witness():
    R = Rotation()
    w = jset_witness(R, 0.0, 0.5, 0.02, 0.02, 10_000, 16, SeededSampler(2))
    assert w is not None
    # the orbit of 0 itself enters B(0.5, 0.02); brute force for the first such time
    alpha = Fraction(GOLDEN)
    first = next(n for n in range(1, 10_001) if circ(float((n * alpha) % 1), 0.5) < 0.02)
    assert w.time <= first
    assert circ(float(apply_iter(R, w.start_point, w.time)[0]), 0.5) <= 0.02


@given(eps=st.floats(0.005, 0.2), delta=st.floats(0.001, 0.2), N=st.integers(5, 60), seed=st.integers(0, 50))
def test_jset_witness_monotone_under_relaxation(eps, delta, N, seed):
    D = Doubling()
    w = jset_witness(D, 0.2, 0.7, eps, delta, N, 64, SeededSampler(seed))
    if w is None:
        return
    for f in (1.0, 1.5, 3.0):
        assert w.start_distance <= delta * f
        assert w.end_distance <= eps * f
        assert w.time <= N * f


# -- scans ----------------------------------------------------------------------


def test_grid_balls():
    balls = grid_balls(Doubling(), 1 / 16)
    assert len(balls) == 16
    assert balls[0].center[0] == 1 / 32 and balls[0].radius == 1 / 32
    with pytest.raises(InvalidInput):
        grid_balls(Doubling(), 0.3)


def test_doubling_scan_hits_everything():
    report = transitivity_scan(Doubling(), grid=1 / 16, N=12, sampler=SeededSampler(0))
    assert report.passed
    assert len(report.verdicts) == 256
    assert report.max_hit_time <= 12
    # oracle: an arc of length 1/16 covers the circle after 4 doublings
    assert report.max_hit_time <= 4


def test_contraction_scan_has_no_hit():
    report = transitivity_scan(Contraction(0.5), [(B(0.2, 0.05), B(0.9, 0.05))], N=10_000, sampler=SeededSampler(0))
    v = report.verdicts[0]
    assert v.verdict == NO_HIT and v.time is None
    assert v.min_distance == pytest.approx(0.9 - 0.25, abs=0.01)
    assert report.strongest_failure() == 0


def test_identity_scan_hits_at_time_zero():
    report = transitivity_scan(Rotation(0.0), [(B(0.3, 0.05), B(0.3, 0.05))], N=1)
    assert report.verdicts[0].time == 0


def test_almost_scan_doubling_passes():
    assert almost_transitivity_scan(Doubling(), grid=1 / 16, N=12, sampler=SeededSampler(0)).passed


def test_almost_scan_contraction_fails_both_directions():
    # with c = 1/2 the backward direction hits: 0.9/4 lands in B(0.2, 0.05), so a strong contraction is used
    pair = [(B(0.2, 0.05), B(0.9, 0.05))]
    strong = almost_transitivity_scan(Contraction(0.1), pair, N=10_000, sampler=SeededSampler(0))
    assert strong.verdicts[0].verdict == NO_HIT
    weak = almost_transitivity_scan(Contraction(0.5), pair, N=10_000, sampler=SeededSampler(0))
    assert weak.verdicts[0].direction == "backward" and weak.verdicts[0].time == 2


@pytest.mark.parametrize("system", [Doubling(), Contraction(0.5), Tent()], ids=repr)
def test_pair_with_itself_hits_at_zero(system):
    report = almost_transitivity_scan(system, [(B(0.6, 0.02), B(0.6, 0.02))], N=3)
    assert report.verdicts[0].time == 0


@pytest.mark.parametrize("system", [Doubling(), Rotation(), Tent(), Contraction(0.3)], ids=repr)
def test_hits_revalidate_and_vocabulary_is_semidecision(system):
    for scan in (transitivity_scan, almost_transitivity_scan):
        report = scan(system, grid=1 / 8, N=10, samples=64, sampler=SeededSampler(4))
        for (U, V), v in zip(report.pairs, report.verdicts):
            assert v.verdict in (HIT, NO_HIT)
            if not v.hit:
                continue
            src, dst = (V, U) if v.direction == "backward" else (U, V)
            assert float(system.distance(v.witness, src.center)) < src.radius
            assert float(system.distance(apply_iter(system, v.witness, v.time), dst.center)) < dst.radius
        text = json.dumps(report.to_dict())
        for word in ("not transitive", "non-member", "impossible"):
            assert word not in text


def test_transitive_pass_implies_almost_pass():
    for system in (Doubling(), Rotation(), Tent(), Contraction(0.5)):
        t = transitivity_scan(system, grid=1 / 8, N=10, samples=64, sampler=SeededSampler(9))
        a = almost_transitivity_scan(system, grid=1 / 8, N=10, samples=64, sampler=SeededSampler(9))
        assert all(av.hit for tv, av in zip(t.verdicts, a.verdicts) if tv.hit)


def test_scan_is_deterministic_across_jobs():
    kw = dict(grid=1 / 16, N=12, samples=32)
    one = transitivity_scan(Tent(), sampler=SeededSampler(3), jobs=1, **kw)
    many = transitivity_scan(Tent(), sampler=SeededSampler(3), jobs=8, **kw)
    again = transitivity_scan(Tent(), sampler=SeededSampler(3), jobs=1, **kw)
    assert json.dumps(one.to_dict()) == json.dumps(many.to_dict()) == json.dumps(again.to_dict())
    assert one.to_csv() == many.to_csv()


def test_scan_csv_has_one_line_per_pair():
    report = transitivity_scan(Doubling(), grid=1 / 4, N=4, sampler=SeededSampler(0))
    lines = report.to_csv().strip().splitlines()
    assert len(lines) == 1 + 16
    assert lines[0].startswith("pair,")


def test_scan_requires_pairs_or_grid():
    with pytest.raises(InvalidInput):
        transitivity_scan(Doubling(), N=3)
    with pytest.raises(InvalidInput):
        transitivity_scan(Doubling(), grid=0.25, N=0)


# -- G-delta --------------------------------------------------------------------


def test_rotation_zero_is_in_gdelta_set():
    res = gdelta_check(Rotation(), 0.0, 0.0, 3, 10, 10_000)
    assert res.member and not res.missing
    assert len(res.evidence) == 30
    alpha = Fraction(GOLDEN)
    for (s, n), m in res.evidence.items():
        assert n < m <= 10_000
        assert circ(float((m * alpha) % 1), 0.0) < 1 / s


def test_identity_gdelta_with_minimal_horizon():
    for S, N in ((1, 1), (4, 7)):
        assert gdelta_check(Rotation(0.0), 0.25, 0.25, S, N, N + 1).member


def test_contraction_gdelta_fails():
    # the orbit 0.8 / 2^m stays below 0.4, so B(0.9, 1/2) is never entered after m = 0
    res = gdelta_check(Contraction(0.5), 0.8, 0.9, 2, 1, 10_000)
    assert not res.member
    assert (1, 1) in res.evidence and (2, 1) in res.missing


def test_gdelta_preconditions():
    with pytest.raises(InvalidInput):
        gdelta_check(Rotation(), 0.0, 0.0, 1, 5, 5)
