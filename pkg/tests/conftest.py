import json
from pathlib import Path

import numpy as np
import pytest

from crasynth.specio import load_spec, system_from_dict

BENCH = Path(__file__).resolve().parents[1] / "src" / "crasynth" / "benchmarks"


def bench(name):
    return load_spec(BENCH / f"{name}.json")


def bench_names(kind=None):
    out = []
    for p in sorted(BENCH.glob("*.json")):
        doc = json.loads(p.read_text())
        k = "safety" if "domain_h" in doc else "reach"
        if kind is None or k == kind:
            out.append(p.stem)
    return out


CONTRACTION = {
    "name": "contraction", "state_vars": ["x"], "input_vars": ["u"], "dynamics": ["0.5*x + 0*u"],
    "safe_h": "x^2 - 1", "target_g": "x^2 - 0.01", "input_lower": [-1], "input_upper": [1], "lambda": 1.01,
}


@pytest.fixture(scope="session")
def contraction():
    return system_from_dict(CONTRACTION)


@pytest.fixture(scope="session")
def running():
    return bench("running_1d")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_poly(rng, variables, degree, n_terms=None):
    from crasynth.polycore import Polynomial, monomial_basis

    basis = monomial_basis(variables, degree)
    if n_terms is not None and n_terms < len(basis):
        idx = rng.choice(len(basis), n_terms, replace=False)
        basis = [basis[i] for i in sorted(idx)]
    return Polynomial({tuple(e): float(rng.uniform(-1, 1)) for e in basis}, variables)


# criterion number -> list of (passed, detail); filled by the acceptance tests
ACCEPTANCE: dict[int, list[tuple[bool, str]]] = {}


@pytest.fixture
def record():
    def add(criterion: int, passed: bool, detail: str):
        ACCEPTANCE.setdefault(criterion, []).append((bool(passed), detail))
    return add


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[k]
        verdict = "PASS" if all(p for p, _ in parts) else "FAIL"
        terminalreporter.write_line(f"criterion {k}: {verdict}")
        for p, detail in parts:
            terminalreporter.write_line(f"    [{'ok' if p else 'x '}] {detail}")
