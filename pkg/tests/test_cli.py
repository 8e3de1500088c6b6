import json

import pytest

from crasynth.cli import main

from conftest import BENCH, CONTRACTION


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def contraction_file(tmp_path):
    p = tmp_path / "contraction.json"
    p.write_text(json.dumps(CONTRACTION))
    return p


def test_init_writes_outputs(tmp_path):
    out = tmp_path / "init"
    assert run("init", "--spec", "running_1d", "--deg-v", 2, "--samples", 10_000, "--out", out) == 0
    for name in ("manifest.json", "certificate.json", "summary.json", "certificate.png"):
        assert (out / name).exists()
    cert = json.loads((out / "certificate.json").read_text())
    assert cert["lambda"] == 1.01


def test_init_is_byte_for_byte_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run("init", "--spec", "running_1d", "--deg-v", 4, "--samples", 10_000, "--out", out) == 0
    assert (a / "certificate.json").read_bytes() == (b / "certificate.json").read_bytes()


def test_iterate_zero_rounds_matches_init(tmp_path):
    assert run("init", "--spec", "running_1d", "--deg-v", 2, "--samples", 10_000, "--out", tmp_path / "i") == 0
    assert run("iterate", "--spec", "running_1d", "--deg-v", 2, "--iters", 0, "--samples", 10_000,
               "--out", tmp_path / "k") == 0
    a = json.loads((tmp_path / "i" / "certificate.json").read_text())
    b = json.loads((tmp_path / "k" / "certificate_00.json").read_text())
    assert a["v"] == b["v"]
    assert (tmp_path / "k" / "history.csv").read_text().count("\n") == 2


def test_volume_of_constant_one(tmp_path, contraction_file):
    out = tmp_path / "vol"
    assert run("volume", "--spec", contraction_file, "--poly", "1", "--samples", 1000, "--out", out) == 0
    assert json.loads((out / "volume.json").read_text())["gamma"] == 1.0


def test_simulate_and_levelset(tmp_path, contraction_file):
    out = tmp_path / "sim"
    assert run("simulate", "--spec", contraction_file, "--poly=-x^2", "--x0", "0.9", "--x0", "-0.5",
               "--horizon", 100, "--out", out) == 0
    rows = (out / "verdicts.csv").read_text().splitlines()
    assert len(rows) == 3 and all("reached" in r for r in rows[1:])
    out = tmp_path / "lvl"
    assert run("levelset", "--spec", contraction_file, "--poly", "1 - 4*x^2", "--grid", 11, "--out", out) == 0
    assert (out / "levelset.csv").read_text().count("\n") == 12


def test_safety_command(tmp_path):
    out = tmp_path / "safe"
    assert run("safety", "--spec", "safe_two_room", "--deg-v", 4, "--out", out) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["validation"]["passed"]


@pytest.mark.parametrize("argv", [
    ("init", "--spec", "no_such_benchmark"),
    ("init",),
    ("frobnicate",),
    ("init", "--spec", "running_1d", "--deg-v", "3"),
    ("volume", "--spec", "running_1d", "--poly", "x^"),
    ("simulate", "--spec", "running_1d", "--poly", "x"),
])
def test_input_errors_exit_2(tmp_path, argv):
    assert run(*argv, "--out", tmp_path / "e") == 2


def test_bad_spec_file_exit_2(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(dict(CONTRACTION, **{"lambda": 0.5})))
    assert run("init", "--spec", p, "--out", tmp_path / "e") == 2


def test_solver_failure_exit_3(tmp_path):
    # every initial state jumps straight into the unsafe band, so no barrier exists
    doc = json.loads((BENCH / "safe_two_room.json").read_text())
    doc["dynamics"] = ["x + 11 + 0*u1", "y + 11 + 0*u2"]
    p = tmp_path / "doomed.json"
    p.write_text(json.dumps(doc))
    assert run("safety", "--spec", p, "--deg-v", 2, "--out", tmp_path / "s") == 3
