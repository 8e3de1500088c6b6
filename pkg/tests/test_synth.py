import dataclasses

import numpy as np
import pytest

from crasynth.polycore import Polynomial
from crasynth.specio import SolveConfig
from crasynth.synth import (ArgmaxDataset, IterationConfig, Normalizer, SynthesisError, argmax_controls,
                            build_initial_program, build_refined_program, control_grid, fit_controller,
                            gen_argmax_data, run_alg1, solve_initial, solve_refined, solve_safety)
from crasynth.validate import estimate_volume, greedy_success_rate, validate_certificate

from conftest import bench

X = Polynomial.var("x")


@pytest.fixture(scope="module")
def contraction_cert(contraction):
    return solve_initial(contraction, SolveConfig(deg_v=4))


def test_contraction_nearly_whole_set(contraction, contraction_cert):
    assert estimate_volume(contraction_cert, contraction, 10 ** 5).gamma >= 0.9
    assert validate_certificate(contraction_cert, contraction).passed


def test_contraction_certified_states_reach_target(contraction, contraction_cert):
    rate, n = greedy_success_rate(contraction_cert, contraction, n=200, horizon=10 ** 4)
    assert n == 200 and rate == 1.0


def test_certificate_records_solver_data(running):
    cert = solve_initial(running, SolveConfig(deg_v=2))
    assert cert.kind == "reach_avoid" and cert.lam == running.lam
    assert set(cert.multipliers) == {"s1", "s2", "s3", "s4"}
    assert cert.shift >= 0 and len(cert.params["residual_bounds"]) == 2
    assert validate_certificate(cert, running).passed


def test_normalizer_round_trip(rng):
    norm = Normalizer.from_box(("x", "y"), (np.array([-2.0, 1.0]), np.array([4.0, 3.0])))
    p = Polynomial({(2, 0): 1.0, (1, 1): -0.5, (0, 1): 3.0, (0, 0): 0.25}, ("x", "y"))
    assert norm.from_scaled(norm.to_scaled(p)).allclose(p, atol=1e-12)
    pts = rng.uniform([-2, 1], [4, 3], size=(50, 2))
    assert np.all(np.abs(norm.points_to_scaled(pts)) <= 1 + 1e-12)


def test_argmax_monotone(running):
    # v(x) = x and f increases with u, so the top of the input range wins everywhere
    states = np.linspace(-0.9, 0.9, 7)[:, None]
    U = control_grid(running.ubox, 11)
    assert np.all(argmax_controls(X, running, states, U) == 1.0)
    assert np.all(argmax_controls(-X, running, states, U) == -1.0)


def test_argmax_matches_brute_force(running, rng):
    v = Polynomial({(4,): -1.0, (2,): 0.5, (1,): 0.3}, ("x",))
    states = rng.uniform(-1, 1, (30, 1))
    U = control_grid(running.ubox, 9)
    got = argmax_controls(v, running, states, U)
    for x, u in zip(states[:, 0], got[:, 0]):
        vals = [v.evaluate({"x": x + 0.01 * (-x - x * x + c)}) for c in U[:, 0]]
        assert u == U[int(np.argmax(vals)), 0]


def test_argmax_dataset_excludes_target(running):
    data = gen_argmax_data(X, running, 40, 5, seed=0, mode="grid")
    assert len(data.states) > 0
    assert np.all(running.target_g.evaluate_array(data.states, running.state_vars) >= 0)
    assert np.all(np.isin(data.controls, control_grid(running.ubox, 5)))


def _linear_data(spec, a, b, n=60):
    xs = np.linspace(-0.95, 0.95, n)
    xs = xs[spec.target_g.evaluate_array(xs[:, None], spec.state_vars) >= 0]
    return ArgmaxDataset(xs[:, None], (a * xs + b)[:, None], (n, 0))


def test_fit_recovers_linear_law(running):
    fit = fit_controller(_linear_data(running, 0.3, 0.1), running, 2, 0.1)
    want = 0.3 * X + 0.1
    assert fit.u_tilde[0].allclose(want.with_variables(("x",)), atol=1e-4)
    assert fit.fit_residual <= 1e-8
    assert fit.box_margin > 0


def test_fit_matches_normal_equations_at_degree_one(running):
    data = _linear_data(running, 0.3, 0.0)
    fit = fit_controller(data, running, 1, 0.1)
    Phi = np.stack([np.ones(len(data.states)), data.states[:, 0]], axis=1)
    want = np.linalg.solve(Phi.T @ Phi, Phi.T @ data.controls[:, 0])
    assert np.allclose(want, [0.0, 0.3], atol=1e-12)
    assert fit.u_tilde[0].coefficient({}) == pytest.approx(want[0], abs=1e-4)
    assert fit.u_tilde[0].coefficient({"x": 1}) == pytest.approx(want[1], abs=1e-4)


def test_fit_zero_target(running):
    fit = fit_controller(_linear_data(running, 0.0, 0.0), running, 2, 0.1)
    assert max(abs(c) for c in fit.coeffs) <= 1e-6


def test_fit_stays_in_shrunk_box(running):
    # the data ask for the upper bound, which lies outside the shrunk box
    data = _linear_data(running, 0.0, 1.0)
    fit = fit_controller(data, running, 2, 0.1)
    assert fit.box_margin >= -1e-6
    xs = np.linspace(-1, 1, 1001)[:, None]
    assert np.max(fit.u_tilde[0].evaluate_array(xs, ("x",))) <= 0.9 + 1e-6


def test_fit_rejects_bad_delta(running):
    with pytest.raises(ValueError):
        fit_controller(_linear_data(running, 0.3, 0.1), running, 2, 1.0)


def test_refined_rejects_controller_outside_box(running):
    fit = fit_controller(_linear_data(running, 0.3, 0.1), running, 2, 0.1)
    bad = dataclasses.replace(fit, box_margin=-0.5)
    with pytest.raises(SynthesisError) as err:
        solve_refined(running, bad, 0.5)
    assert err.value.status == "input_error"


def test_eps_one_program_matches_initial(running):
    cfg = SolveConfig(deg_v=4)
    fit = fit_controller(_linear_data(running, 0.3, 0.1), running, 2, 0.1)
    a = build_refined_program(running, fit, 1.0, cfg=cfg).compile()
    b = build_initial_program(running, cfg).compile()
    assert a.blocks == b.blocks and a.m == b.m
    assert np.allclose(a.b, b.b, atol=1e-13)
    for (r1, i1, k1, v1), (r2, i2, k2, v2) in zip(a.A_psd, b.A_psd):
        assert np.array_equal(r1, r2) and np.array_equal(i1, i2) and np.array_equal(k1, k2)
        assert np.allclose(v1, v2, atol=1e-13)
    assert np.allclose(a.A_lp.toarray(), b.A_lp.toarray(), atol=1e-13)


def test_epsilon_schedule():
    it = IterationConfig(eps0=0.5, schedule_factor=0.8)
    assert it.epsilon(1) == 0.5
    assert it.epsilon(3) == pytest.approx(0.5 * 0.64)
    with pytest.raises(ValueError):
        IterationConfig(eps0=1.5)
    with pytest.raises(ValueError):
        IterationConfig(K=-1)


def test_iteration_union_is_monotone(contraction):
    it = IterationConfig(K=2, n_states=20, n_controls=5, volume_samples=20_000, solve=SolveConfig(deg_v=4))
    res = run_alg1(contraction, it)
    assert len(res.records) == 3 and len(res.certificates) == 3
    union = [r.union_gamma for r in res.records]
    assert all(b >= a for a, b in zip(union, union[1:]))
    assert union[0] >= 0.9


def test_iteration_zero_rounds_is_initial(running):
    it = IterationConfig(K=0, volume_samples=10_000, solve=SolveConfig(deg_v=2))
    res = run_alg1(running, it)
    init = solve_initial(running, SolveConfig(deg_v=2))
    assert len(res.certificates) == 1
    assert res.certificates[0].v == init.v


def test_safety_two_room():
    spec = bench("safe_two_room")
    cert = solve_safety(spec, SolveConfig(deg_v=4))
    assert cert.kind == "safety"
    assert cert.params["sound"]
    assert validate_certificate(cert, spec).passed
