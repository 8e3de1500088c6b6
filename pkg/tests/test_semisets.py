import math

import numpy as np
import pytest

from crasynth.polycore import Polynomial
from crasynth.semisets import (BoxSet, SublevelSet, ThinSetError, UnsupportedSetError, compute_xhat,
                               domain_set, monomial_moment, safe_set, sample_uniform, set_volume, xhat_set)
from crasynth.specio import SafetySpec, system_from_dict

from conftest import CONTRACTION, bench, bench_names, random_poly

X = Polynomial.var("x")


def disc(r=1.0):
    V = ("x", "y")
    p = Polynomial({(2, 0): 1.0, (0, 2): 1.0, (0, 0): -r * r}, V)
    return SublevelSet.build(p, V)


def test_xhat_example1_frozen():
    # interval image of 0.99x - 0.01x^2 + 0.01u over [-1,1]^2 is [-1.01, 1.0]
    h = compute_xhat(bench("running_1d"))
    assert h.coefficient({"x": 2}) == 1.0
    assert h.constant_term() == pytest.approx(-1.01 ** 2, abs=1e-8)


def test_xhat_frozen_dynamics():
    spec = system_from_dict(dict(CONTRACTION, dynamics=["x + 0*u"]))
    assert compute_xhat(spec).constant_term() == pytest.approx(-1.0, abs=1e-9)


def test_xhat_user_override():
    spec = system_from_dict(dict(CONTRACTION, xhat_h="x^2 - 4"))
    assert xhat_set(spec).defining_poly.constant_term() == -4.0


def _xhat_containment(spec, n, seed):
    rng = np.random.default_rng(seed)
    X = safe_set(spec)
    xs = sample_uniform(X, n, rng)
    us = rng.uniform(spec.ubox.lower, spec.ubox.upper, size=(n, spec.m))
    pts = np.concatenate([xs, us], axis=1)
    allv = spec.state_vars + spec.input_vars
    nxt = np.stack([f.evaluate_array(pts, allv) for f in spec.dynamics], axis=1)
    h = xhat_set(spec).defining_poly
    return int(np.sum(h.evaluate_array(nxt, spec.state_vars) >= 0)), int(np.sum(h.evaluate_array(xs, spec.state_vars) >= 0))


@pytest.mark.parametrize("name", bench_names("reach"))
def test_xhat_contains_successors_on_benchmarks(name):
    bad_next, bad_x = _xhat_containment(bench(name), 10 ** 5, 0)
    assert bad_next == 0 and bad_x == 0


def test_xhat_contains_successors_random_quadratic(rng):
    V = ("x", "y")
    for seed in range(3):
        r = np.random.default_rng(seed)
        dyn = [random_poly(r, V + ("u",), 2).render(), random_poly(r, V + ("u",), 2).render()]
        spec = system_from_dict({"state_vars": list(V), "input_vars": ["u"], "dynamics": dyn,
                                 "safe_h": "x^2 + y^2 - 1", "target_g": "x^2 + y^2 - 0.01",
                                 "input_lower": [-1], "input_upper": [1], "lambda": 1.01})
        assert _xhat_containment(spec, 10 ** 5, seed) == (0, 0)


def test_box_moments():
    box = BoxSet(np.array([-1.0]), np.array([1.0]), ("x",))
    assert monomial_moment(box, (2,)) == pytest.approx(2 / 3)
    b2 = BoxSet(np.array([-1.0, 0.0]), np.array([2.0, 3.0]), ("x", "y"))
    assert monomial_moment(b2, (3, 2)) == pytest.approx(((16 - 1) / 4) * (27 / 3))


def test_ball_moments_odd_vanish():
    for n in (1, 2, 4):
        V = tuple(f"x{i}" for i in range(n))
        p = Polynomial.const(-1.0, V)
        for v in V:
            p = p + Polynomial.var(v) ** 2
        ball = SublevelSet.build(p.with_variables(V), V)
        e = [2] * n
        e[0] = 3
        assert monomial_moment(ball, e) == 0.0


def test_disc_second_moment_and_monte_carlo():
    assert monomial_moment(disc(), (2, 0)) == pytest.approx(math.pi / 4, rel=1e-14)
    pts = np.random.default_rng(0).uniform(-1, 1, size=(10 ** 7, 2))
    inside = (pts ** 2).sum(axis=1) < 1
    mc = 4.0 * np.mean(np.where(inside, pts[:, 0] ** 2, 0.0))
    assert abs(mc - math.pi / 4) < 1e-3


def test_shifted_ball_moment_matches_monte_carlo():
    V = ("x", "y")
    p = parse_ball(0.3, -0.2, 0.5)
    region = SublevelSet.build(p, V)
    pts = sample_uniform(region, 400_000, 1)
    vol = set_volume(region)
    mc = vol * np.mean(pts[:, 0] ** 2 * pts[:, 1])
    assert monomial_moment(region, (2, 1)) == pytest.approx(mc, abs=2e-3 * vol)


def parse_ball(cx, cy, r):
    from crasynth.specio import parse_polynomial
    return parse_polynomial(f"(x - {cx})^2 + (y - {cy})^2 - {r * r}", ["x", "y"])


def test_unsupported_moment_shape():
    V = ("x", "y")
    p = Polynomial({(4, 0): 1.0, (0, 2): 1.0, (0, 0): -1.0}, V)
    with pytest.raises(UnsupportedSetError):
        monomial_moment(SublevelSet(tuple([p]), V, True, (np.array([-1, -1.0]), np.array([1, 1.0]))), (0, 0))


def test_sample_interval_mean():
    s = SublevelSet.build(X * X - 1, ("x",))
    pts = sample_uniform(s, 10 ** 5, 0)
    assert np.all(pts ** 2 < 1)
    assert abs(pts.mean()) < 0.01


def test_sample_empty_set_is_thin():
    s = SublevelSet.build(X * X + 1, ("x",))
    with pytest.raises(ThinSetError):
        sample_uniform(s, 10, 0)


def test_sample_thin_set_rejected():
    V = ("x", "y")
    p = Polynomial({(4, 0): 1.0, (0, 4): 1.0, (0, 0): -1e-30}, V)
    region = SublevelSet(tuple([p]), V, True, (np.array([-1.0, -1.0]), np.array([1.0, 1.0])))
    with pytest.raises(ThinSetError):
        sample_uniform(region, 10, 0, max_proposals=2 * 10 ** 7)


def test_disc_half_measure():
    pts = sample_uniform(disc(), 10 ** 5, 3)
    assert np.all((pts ** 2).sum(axis=1) < 1)
    assert abs(np.mean(pts[:, 0] > 0) - 0.5) < 0.005


def test_sampling_deterministic():
    a = sample_uniform(disc(), 1000, 7)
    b = sample_uniform(disc(), 1000, 7)
    assert np.array_equal(a, b)


def test_rejection_path_is_uniform():
    # an ellipse is not a ball, so sampling goes through rejection
    V = ("x", "y")
    p = Polynomial({(2, 0): 1.0, (0, 2): 4.0, (0, 0): -1.0}, V)
    region = SublevelSet.build(p, V)
    pts = sample_uniform(region, 50_000, 2)
    assert np.all(region.contains(pts))
    assert abs(np.mean(pts[:, 0] > 0) - 0.5) < 0.01


@pytest.mark.parametrize("name", bench_names("safety"))
def test_safety_domains_have_boxes(name):
    spec = bench(name)
    assert isinstance(spec, SafetySpec)
    lo, hi = domain_set(spec).box
    assert np.all(lo < hi)
