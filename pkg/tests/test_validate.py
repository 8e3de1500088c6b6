import csv

import numpy as np
import pytest

from crasynth.polycore import Polynomial
from crasynth.specio import SolveConfig
from crasynth.synth import solve_initial
from crasynth.validate import (estimate_volume, greedy_success_rate, positive_intervals, simulate_greedy,
                               union_volume, validate_certificate, write_levelset_csv)

from conftest import bench

X = Polynomial.var("x")
ONE = Polynomial.const(1.0, ("x",))


def test_constant_volumes(running):
    assert estimate_volume(ONE, running, 10 ** 4).gamma == 1.0
    assert estimate_volume(-ONE, running, 10 ** 4).gamma == 0.0


def test_half_interval_volume(running):
    est = estimate_volume(X, running, 10 ** 5, seed=3)
    assert abs(est.gamma - 0.5) <= 4 * est.std_error


def test_std_error_matches_seed_scatter(running):
    n = 4000
    gammas = [estimate_volume(X * X - 0.25, running, n, seed=s).gamma for s in range(40)]
    predicted = estimate_volume(X * X - 0.25, running, n, seed=0).std_error
    assert 0.6 * predicted <= np.std(gammas) <= 1.5 * predicted


def test_union_volume(running):
    u = union_volume([X - 0.5, -X - 0.5], running, 10 ** 5)
    assert abs(u.gamma - 0.5) < 0.01


def test_volume_is_deterministic(running):
    assert estimate_volume(X, running, 1000, 5) == estimate_volume(X, running, 1000, 5)


@pytest.fixture(scope="module")
def running_cert(running):
    return solve_initial(running, SolveConfig(deg_v=4))


def test_example_certificate_passes(running, running_cert):
    report = validate_certificate(running_cert, running)
    assert report.passed
    assert [r.name for r in report.rows] == ["decrease", "outside"]


def test_raised_certificate_fails_outside_safe_set(running, running_cert):
    import copy
    bad = copy.copy(running_cert)
    bad.v = running_cert.v + 0.1
    report = validate_certificate(bad, running)
    assert not report.passed
    row = report.rows[1]
    assert row.name == "outside" and not row.passed
    assert abs(row.witness[0]) >= 1.0
    assert "VIOLATED" in report.summary()


def test_greedy_start_in_target(contraction):
    traj = simulate_greedy(ONE, contraction, [0.05])
    assert traj.verdict == "reached" and traj.steps == 0


def test_greedy_contraction_reaches_target(contraction):
    traj = simulate_greedy(-X * X, contraction, [0.9])
    assert traj.verdict == "reached"
    # x halves every step: 0.9 -> 0.45 -> ... < 0.1 after four steps
    assert traj.steps == 4
    assert traj.states.shape == (5, 1) and traj.controls.shape == (4, 1)


def test_greedy_start_outside_safe_set_rejected(running):
    with pytest.raises(ValueError):
        simulate_greedy(X, running, [1.5])


def test_greedy_leaves_safe_set(running):
    # v = -x picks u = -1, and one step from -0.999 lands near -1.009
    traj = simulate_greedy(-X, running, [-0.999], horizon=10 ** 4)
    assert traj.verdict == "left_safe"


def test_success_rate_nan_on_empty_set(running):
    rate, n = greedy_success_rate(-ONE, running, n=10)
    assert n == 0 and np.isnan(rate)


def test_levelset_csv_rows(tmp_path):
    spec = bench("vanderpol_2d")
    v = Polynomial({(2, 0): -1.0, (0, 2): -1.0, (0, 0): 1.0}, spec.state_vars)
    n = write_levelset_csv(tmp_path / "g.csv", v, spec, resolution=21)
    rows = list(csv.reader((tmp_path / "g.csv").open()))
    assert n == 21 ** 2 and len(rows) == 21 ** 2 + 1
    assert rows[0] == list(spec.state_vars) + ["v", "sign"]


def test_positive_intervals(running):
    iv = positive_intervals(0.25 - X * X, running, resolution=2001)
    assert len(iv) == 1
    assert iv[0][0] == pytest.approx(-0.5, abs=2e-3) and iv[0][1] == pytest.approx(0.5, abs=2e-3)
    assert positive_intervals(-ONE, running) == []


def test_safety_validation_detects_bad_barrier():
    from crasynth.soscomp import Certificate
    spec = bench("safe_two_room")
    cert = Certificate("safety", Polynomial.const(1.0, spec.state_vars), spec.lam)
    report = validate_certificate(cert, spec)
    assert not report.passed
    assert {r.name for r in report.rows if not r.passed} >= {"unsafe"}
