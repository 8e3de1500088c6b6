import numpy as np
import pytest
from scipy.integrate import quad

from crasynth.polycore import Polynomial, compose, integrate_var, interval_range, monomial_basis
from crasynth.polycore import Monomial, add, mul, evaluate

from conftest import random_poly

X = Polynomial.var("x")
U = Polynomial.var("u")


def points(rng, k, n=20):
    return rng.uniform(-1.5, 1.5, size=(n, k))


def test_add_cancellation_and_identity():
    assert add(X + 1, -X + 1) == Polynomial.const(2.0)
    p = X * X - 3 * X
    assert add(p, Polynomial.const(0.0)) == p


def test_zero_terms_never_stored():
    p = X - X
    assert p.is_zero() and p.terms == {}
    assert Polynomial({(2,): 0.0, (1,): 1.0}, ("x",)).terms == {(1,): 1.0}


def test_mul_basic():
    assert mul(X + 1, X - 1) == X * X - 1
    assert (Polynomial.const(0.0) * (X ** 3 + 2)).is_zero()


def test_mul_degree_adds():
    p = X ** 3 + U
    q = X * U + 1
    assert (p * q).degree() == p.degree() + q.degree()


@pytest.mark.parametrize("op,deg", [("add", 4), ("mul", 3)])
def test_ring_ops_match_pointwise(rng, op, deg):
    V = ("x", "y")
    p, q = random_poly(rng, V, deg), random_poly(rng, V, deg)
    r = p + q if op == "add" else p * q
    pts = points(rng, 2)
    a, b = p.evaluate_array(pts, V), q.evaluate_array(pts, V)
    want = a + b if op == "add" else a * b
    assert np.max(np.abs(r.evaluate_array(pts, V) - want)) <= 1e-10


def test_distributive_pointwise(rng):
    V = ("x", "y", "z")
    p, q, r = (random_poly(rng, V, 3) for _ in range(3))
    pts = points(rng, 3)
    lhs = ((p + q) * r).evaluate_array(pts, V)
    rhs = (p * r + q * r).evaluate_array(pts, V)
    assert np.max(np.abs(lhs - rhs)) <= 1e-9


def test_commutative_and_associative(rng):
    V = ("x", "y")
    p, q, r = (random_poly(rng, V, 4) for _ in range(3))
    assert (p * q).allclose(q * p)
    assert ((p + q) + r).allclose(p + (q + r))
    assert ((p * q) * r).allclose(p * (q * r), atol=1e-12, rtol=1e-12)


def test_compose_example_dynamics():
    f = X + 0.01 * (-X - X * X + U)
    v = X * X
    got = compose(v, {"x": f})
    assert got.allclose(f * f)


def test_compose_identity(rng):
    V = ("x", "y")
    p = random_poly(rng, V, 4)
    assert compose(p, {"x": Polynomial.var("x"), "y": Polynomial.var("y")}).allclose(p)


def test_compose_matches_nested_evaluation(rng):
    V = ("x", "y")
    v = random_poly(rng, V, 4)
    fx, fy = random_poly(rng, V, 2), random_poly(rng, V, 2)
    c = compose(v, {"x": fx, "y": fy})
    pts = points(rng, 2, 50)
    inner = np.stack([fx.evaluate_array(pts, V), fy.evaluate_array(pts, V)], axis=1)
    assert np.max(np.abs(c.evaluate_array(pts, V) - v.evaluate_array(inner, V))) <= 1e-9
    assert c.degree() <= v.degree() * 2


def test_compose_distributes_over_add(rng):
    V = ("x", "y")
    p, q = random_poly(rng, V, 3), random_poly(rng, V, 3)
    s = {"x": random_poly(rng, V, 2), "y": random_poly(rng, V, 2)}
    pts = points(rng, 2)
    lhs = compose(p + q, s).evaluate_array(pts, V)
    rhs = (compose(p, s) + compose(q, s)).evaluate_array(pts, V)
    assert np.max(np.abs(lhs - rhs)) <= 1e-9


def test_compose_missing_image():
    with pytest.raises(KeyError):
        compose(X * U, {"x": X})


def test_integrate_constant_bounds():
    assert integrate_var(U * U, "u", -1, 1).constant_term() == pytest.approx(2 / 3, abs=1e-15)
    assert integrate_var(U, "u", -1, 1).is_zero()


def test_integrate_polynomial_bounds():
    u0 = 0.3 * X + X * X
    delta = 0.1
    got = integrate_var(U, "u", u0 - delta, u0 + delta)
    assert got.allclose((2 * delta) * u0)
    assert "u" not in got.used_variables()


@pytest.mark.parametrize("k,a,b", [(0, -1, 2), (3, -2, 1), (5, 0, 3), (6, -1, 1)])
def test_integrate_monomial_power_rule_exact(k, a, b):
    got = integrate_var(U ** k, "u", a, b).constant_term()
    assert got == (b ** (k + 1) - a ** (k + 1)) / (k + 1)


def test_integrate_matches_quadrature(rng):
    for _ in range(10):
        p = random_poly(rng, ("u",), 6)
        a, b = sorted(rng.uniform(-2, 2, 2))
        want, _ = quad(lambda t: p.evaluate({"u": t}), a, b, epsabs=1e-13, epsrel=1e-13)
        got = integrate_var(p, "u", a, b)
        assert abs(got.constant_term() - want) <= 1e-8


def test_integrate_bound_with_variable_rejected():
    with pytest.raises(ValueError):
        integrate_var(U * X, "u", U - 1, 1)


def test_evaluate():
    assert (X * X - 1).evaluate({"x": 2.0}) == 3.0
    assert Polynomial.const(5.0).evaluate({"x": 123.0}) == 5.0
    with pytest.raises(KeyError):
        (X * U).evaluate({"x": 1.0})


def test_vectorised_matches_naive_sum(rng):
    V = ("x", "y", "z")
    p = random_poly(rng, V, 8)
    pts = rng.uniform(-1, 1, size=(30, 3))
    naive = np.array([p.evaluate(dict(zip(V, q))) for q in pts])
    fast = p.evaluate_array(pts, V)
    assert np.max(np.abs(naive - fast)) <= 1e-12 * max(1.0, np.max(np.abs(naive)))


def test_monomial_basis_counts():
    assert len(monomial_basis(("x",), 4)) == 5
    assert len(monomial_basis(("x", "y"), 2)) == 6
    assert len(monomial_basis(("x", "y", "z"), 8)) == 165


def test_monomial_type():
    m = Monomial.of(x=2, y=0, z=1)
    assert m.degree == 3
    assert m.as_dict() == {"x": 2, "z": 1}


def test_render_is_canonical(rng):
    V = ("x", "y")
    p = random_poly(rng, V, 3)
    q = Polynomial(dict(reversed(list(p.terms.items()))), V)
    assert p.render() == q.render()


def test_interval_range_encloses_samples(rng):
    V = ("x", "y")
    p = random_poly(rng, V, 4)
    lo, hi = interval_range(p, {"x": (-1, 1), "y": (-0.5, 2)})
    pts = np.column_stack([rng.uniform(-1, 1, 5000), rng.uniform(-0.5, 2, 5000)])
    vals = p.evaluate_array(pts, V)
    assert lo <= vals.min() and vals.max() <= hi


def test_module_helpers():
    assert evaluate(X + 1, {"x": 1.0}) == 2.0
