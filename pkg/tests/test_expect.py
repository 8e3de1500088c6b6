import numpy as np
import pytest
from scipy.integrate import quad

from crasynth.expect import (EpsGreedyParams, expect_eps_greedy, expect_uniform, greedy_successor)
from crasynth.polycore import Polynomial
from crasynth.semisets import BoxSet
from crasynth.specio import parse_polynomial

from conftest import random_poly

V = ("x",)
F1 = [parse_polynomial("x + 0.01*(-x - x^2 + u)", ["x", "u"])]
U1 = BoxSet(np.array([-1.0]), np.array([1.0]), ("u",))
X = Polynomial.var("x")


def f1_at(x, u):
    return x + 0.01 * (-x - x * x + u)


def test_uniform_linear_v():
    got = expect_uniform(X, F1, U1, V)
    assert got.allclose(Polynomial({(1,): 0.99, (2,): -0.01}, V), atol=1e-15)


def test_uniform_constant():
    assert expect_uniform(Polynomial.const(3.5, V), F1, U1, V).allclose(Polynomial.const(3.5, V))


def test_uniform_square_vs_quadrature(rng):
    e = expect_uniform(X * X, F1, U1, V)
    for x in rng.uniform(-1, 1, 30):
        want = quad(lambda u: f1_at(x, u) ** 2, -1, 1, epsabs=1e-14)[0] / 2
        assert abs(e.evaluate({"x": x}) - want) <= 1e-8


def test_uniform_two_inputs_vs_quadrature(rng):
    from scipy.integrate import dblquad
    f = [parse_polynomial("x + 0.1*u1*x - 0.05*u2^2", ["x", "u1", "u2"])]
    ub = BoxSet(np.array([-1.0, 0.0]), np.array([1.0, 2.0]), ("u1", "u2"))
    v = X ** 3 - X
    e = expect_uniform(v, f, ub, V)
    for x in rng.uniform(-1, 1, 5):
        g = lambda u2, u1: (lambda y: y ** 3 - y)(x + 0.1 * u1 * x - 0.05 * u2 ** 2)
        want = dblquad(g, -1, 1, 0, 2, epsabs=1e-13)[0] / 4.0
        assert abs(e.evaluate({"x": x}) - want) <= 1e-8


def params(eps, delta, ctrl=None, ub=U1):
    return EpsGreedyParams(eps, delta, ub, tuple(ctrl) if ctrl is not None else None)


def test_eps_one_matches_uniform(rng):
    v = random_poly(rng, V, 4)
    a = expect_eps_greedy(v, F1, params(1.0, 0.1, [0.7 * X]), V)
    b = expect_uniform(v, F1, U1, V)
    assert a.allclose(b, atol=1e-14)


def test_eps_zero_is_local_average(rng):
    v = random_poly(rng, V, 4)
    c = 0.5 * X
    e = expect_eps_greedy(v, F1, params(0.0, 0.1, [c]), V)
    for x in rng.uniform(-1, 1, 10):
        u0 = 0.5 * x
        want = quad(lambda u: v.evaluate({"x": f1_at(x, u)}), u0 - 0.1, u0 + 0.1, epsabs=1e-14)[0] / 0.2
        assert abs(e.evaluate({"x": x}) - want) <= 1e-8


def test_Z_formula():
    assert params(0.5, 0.1).Z == pytest.approx(1.1, abs=1e-15)
    ub = BoxSet(np.array([-1.0, -2.0]), np.array([1.0, 2.0]), ("u", "w"))
    p = EpsGreedyParams(0.25, 0.2, ub)
    assert p.Z == pytest.approx(0.75 * 0.4 ** 2 + 0.25 * 8.0)
    assert p.with_epsilon(1.0).Z == pytest.approx(8.0)


def test_mixture_vs_quadrature(rng):
    v = random_poly(rng, V, 4)
    p = params(0.5, 0.1, [0.5 * X])
    e = expect_eps_greedy(v, F1, p, V)
    for x in rng.uniform(-1, 1, 30):
        g = lambda u: v.evaluate({"x": f1_at(x, u)})
        u0 = 0.5 * x
        local = quad(g, u0 - 0.1, u0 + 0.1, epsabs=1e-14)[0]
        full = quad(g, -1, 1, epsabs=1e-14)[0]
        want = (0.5 * local + 0.5 * full) / p.Z
        assert abs(e.evaluate({"x": x}) - want) <= 1e-8


@pytest.mark.parametrize("eps,delta", [(0.0, 0.1), (0.3, 0.2), (0.5, 0.1), (1.0, 0.1), (0.7, 0.0)])
def test_normalisation_exact(eps, delta):
    one = Polynomial.const(1.0, V)
    e = expect_eps_greedy(one, F1, params(eps, delta, [0.3 * X]), V)
    assert e.terms == {(0,): 1.0}


def test_linearity(rng):
    p = params(0.4, 0.15, [0.2 + 0.3 * X])
    v1, v2 = random_poly(rng, V, 4), random_poly(rng, V, 3)
    lhs = expect_eps_greedy(v1.scale(2.0) + v2.scale(-0.5), F1, p, V)
    rhs = expect_eps_greedy(v1, F1, p, V).scale(2.0) + expect_eps_greedy(v2, F1, p, V).scale(-0.5)
    assert lhs.allclose(rhs, atol=1e-10)


def test_max_dominates_mixture(rng):
    v = random_poly(rng, V, 4)
    p = params(0.3, 0.1, [0.4 * X])
    e = expect_eps_greedy(v, F1, p, V)
    xs = rng.uniform(-1, 1, 1000)
    us = np.linspace(-1, 1, 2001)
    for x in xs[:200]:
        best = max(v.evaluate_array(f1_at(x, us)[:, None], V))
        assert best >= e.evaluate({"x": x}) - 1e-8


def test_invalid_params():
    with pytest.raises(ValueError):
        params(0.0, 0.0)
    with pytest.raises(ValueError):
        params(0.5, 1.0)
    with pytest.raises(ValueError):
        params(1.5, 0.1)
    with pytest.raises(ValueError):
        expect_eps_greedy(X, F1, params(0.5, 0.1), V)


def test_greedy_substitution():
    g = greedy_successor(X * X, F1, [0.5 * X], V, ("u",))
    want = (X + 0.01 * (-X - X * X + 0.5 * X)) ** 2
    assert g.allclose(want, atol=1e-15)
