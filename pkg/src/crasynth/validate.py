"""Solver-free checks: Monte Carlo volume, sampled constraint margins, greedy simulation."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .expect import EpsGreedyParams, expect_eps_greedy, expect_uniform, greedy_successor
from .polycore import Polynomial
from .semisets import (SublevelSet, domain_set, init_set, safe_set, sample_uniform, unsafe_set,
                       xhat_set)
from .soscomp import Certificate
from .specio import SafetySpec, SystemSpec


@dataclass(frozen=True)
class VolumeEstimate:
    gamma: float
    n_samples: int
    seed: int
    inside: int

    @property
    def std_error(self) -> float:
        return float(np.sqrt(self.gamma * (1.0 - self.gamma) / self.n_samples))


def _region_of(spec):
    return domain_set(spec) if isinstance(spec, SafetySpec) else safe_set(spec)


def _as_poly(v) -> Polynomial:
    return v.v if isinstance(v, Certificate) else v


def union_volume(vs: Sequence[Polynomial], spec, n: int = 10 ** 6, seed: int = 0) -> VolumeEstimate:
    """Fraction of uniform samples of the safe set where some ``v`` is positive."""
    pts = sample_uniform(_region_of(spec), n, seed)
    inside = np.zeros(n, dtype=bool)
    for v in vs:
        inside |= _as_poly(v).evaluate_array(pts, spec.state_vars) > 0
    k = int(inside.sum())
    return VolumeEstimate(k / n, n, seed, k)


def estimate_volume(v, spec, n: int = 10 ** 6, seed: int = 0) -> VolumeEstimate:
    """gamma = share of n uniform samples of X on which v > 0."""
    return union_volume([v], spec, n, seed)


# ---------------------------------------------------------------------------
# certificate validation


@dataclass
class RowCheck:
    name: str
    region: str
    n_points: int
    worst_margin: float
    witness: list[float] | None
    passed: bool


@dataclass
class ValidationReport:
    kind: str
    tol: float
    rows: list[RowCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "tol": self.tol, "passed": self.passed,
                "rows": [{"name": r.name, "region": r.region, "n_points": r.n_points,
                          "worst_margin": r.worst_margin, "witness": r.witness, "passed": r.passed}
                         for r in self.rows]}

    def summary(self) -> str:
        lines = [f"{self.kind} certificate: {'PASS' if self.passed else 'FAIL'} (tol {self.tol:g})"]
        for r in self.rows:
            lines.append(f"  {r.name:<10} {r.region:<10} n={r.n_points:<6} worst={r.worst_margin:+.3e}"
                         f" {'ok' if r.passed else 'VIOLATED at ' + str(r.witness)}")
        return "\n".join(lines)


def _sample_filtered(region, keep, n: int, rng: np.random.Generator, variables) -> np.ndarray:
    """``n`` uniform points of ``region`` that also satisfy ``keep`` (rejection)."""
    chunks, have = [], 0
    for _ in range(200):
        pts = sample_uniform(region, max(n, 1000), rng)
        pts = pts[keep(pts)]
        chunks.append(pts)
        have += len(pts)
        if have >= n:
            break
    return np.concatenate(chunks)[:n] if chunks else np.zeros((0, len(variables)))


def _row(name, region, values, pts, tol, strict=False) -> RowCheck:
    if len(values) == 0:
        return RowCheck(name, region, 0, float("inf"), None, True)
    i = int(np.argmin(values))
    worst = float(values[i])
    ok = worst > 0 if strict else worst >= -tol
    return RowCheck(name, region, len(values), worst, None if ok else [float(c) for c in pts[i]], ok)


def successor_expectation(cert: Certificate, spec: SystemSpec) -> Polynomial:
    """The expectation of v after one step under the law recorded in the certificate."""
    v = cert.v
    params = cert.params or {}
    mode = params.get("mode", "uniform")
    if mode == "uniform" or cert.controller is None:
        return expect_uniform(v, spec.dynamics, spec.ubox, spec.state_vars)
    if mode == "greedy":
        return greedy_successor(v, spec.dynamics, cert.controller, spec.state_vars, spec.input_vars)
    ep = EpsGreedyParams(float(params["epsilon"]), float(params["delta"]), spec.ubox, tuple(cert.controller))
    return expect_eps_greedy(v, spec.dynamics, ep, spec.state_vars)


def validate_certificate(cert: Certificate, spec, n_per_region: int = 10 ** 4, tol: float = 1e-6,
                         seed: int = 0) -> ValidationReport:
    """Sample every constraint region and report the worst margin of each row."""
    rng = np.random.default_rng(seed)
    V = spec.state_vars
    report = ValidationReport(cert.kind, tol)
    if isinstance(spec, SafetySpec):
        E = expect_uniform(cert.v, spec.dynamics, spec.ubox, V)
        row = E - cert.v.scale(spec.lam)
        D = domain_set(spec)
        pts = sample_uniform(D, n_per_region, rng)
        report.rows.append(_row("decrease", "domain", row.evaluate_array(pts, V), pts, tol))
        U = unsafe_set(spec)
        pts = sample_uniform(U, n_per_region, rng)
        report.rows.append(_row("unsafe", "unsafe", -cert.v.evaluate_array(pts, V), pts, tol))
        I = init_set(spec)
        pts = sample_uniform(I, n_per_region, rng)
        report.rows.append(_row("initial", "initial", cert.v.evaluate_array(pts, V), pts, tol, strict=True))
        return report
    E = successor_expectation(cert, spec)
    row = E - cert.v.scale(spec.lam)
    X = safe_set(spec)
    pts = _sample_filtered(X, lambda p: spec.target_g.evaluate_array(p, V) >= 0, n_per_region, rng, V)
    report.rows.append(_row("decrease", "X\\T", row.evaluate_array(pts, V), pts, tol))
    Xh = xhat_set(spec)
    pts = _sample_filtered(Xh, lambda p: spec.safe_h.evaluate_array(p, V) >= 0, n_per_region, rng, V)
    report.rows.append(_row("outside", "Xhat\\X", -cert.v.evaluate_array(pts, V), pts, tol))
    return report


# ---------------------------------------------------------------------------
# greedy closed-loop simulation


@dataclass
class Trajectory:
    states: np.ndarray
    controls: np.ndarray
    verdict: str                 # reached | left_safe | horizon_exhausted

    @property
    def steps(self) -> int:
        return len(self.controls)


def _control_grid(spec, M: int) -> np.ndarray:
    axes = [np.linspace(a, b, M) for a, b in zip(spec.ubox.lower, spec.ubox.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _step_all(spec, X: np.ndarray, U: np.ndarray) -> np.ndarray:
    """Successors of every state in X under every control in U: shape (len(X), len(U), n)."""
    K = len(U)
    pts = np.concatenate([np.repeat(X, K, axis=0), np.tile(U, (len(X), 1))], axis=1)
    allv = spec.state_vars + spec.input_vars
    nxt = np.stack([f.evaluate_array(pts, allv) for f in spec.dynamics], axis=1)
    return nxt.reshape(len(X), K, spec.n)


def simulate_many(v, spec: SystemSpec, x0s: np.ndarray, horizon: int = 10 ** 5, M: int = 101,
                  record: bool = False):
    """Greedy rollouts from several starts at once; returns verdicts, hitting steps and paths."""
    v = _as_poly(v)
    V = spec.state_vars
    X = np.array(x0s, dtype=float).reshape(-1, spec.n)
    U = _control_grid(spec, M)
    n0 = len(X)
    verdict = np.array(["horizon_exhausted"] * n0, dtype=object)
    steps = np.full(n0, horizon)
    active = np.ones(n0, dtype=bool)
    paths = [[x.copy()] for x in X] if record else None
    ctrls = [[] for _ in range(n0)] if record else None
    for t in range(horizon + 1):
        idx = np.flatnonzero(active)
        if len(idx) == 0:
            break
        cur = X[idx]
        hit = spec.target_g.evaluate_array(cur, V) < 0
        out = spec.safe_h.evaluate_array(cur, V) >= 0
        for mask, label in ((hit, "reached"), (out & ~hit, "left_safe")):
            done = idx[mask]
            verdict[done] = label
            steps[done] = t
            active[done] = False
        if t == horizon:
            break
        idx = np.flatnonzero(active)
        if len(idx) == 0:
            break
        nxt = _step_all(spec, X[idx], U)
        vals = v.evaluate_array(nxt.reshape(-1, spec.n), V).reshape(len(idx), len(U))
        best = np.argmax(vals, axis=1)
        X[idx] = nxt[np.arange(len(idx)), best]
        if record:
            for j, i in enumerate(idx):
                paths[i].append(X[i].copy())
                ctrls[i].append(U[best[j]].copy())
    return verdict, steps, (paths, ctrls)


def simulate_greedy(v, spec: SystemSpec, x0, horizon: int = 10 ** 5, M: int = 101) -> Trajectory:
    """Roll out u(t) = argmax over the control grid of v(f(x(t), u))."""
    x0 = np.asarray(x0, dtype=float).reshape(1, spec.n)
    if not spec.safe_h.evaluate_array(x0, spec.state_vars)[0] < 0:
        raise ValueError("initial state lies outside the safe set")
    verdict, _, (paths, ctrls) = simulate_many(v, spec, x0, horizon, M, record=True)
    controls = np.array(ctrls[0]).reshape(-1, spec.m)
    return Trajectory(np.array(paths[0]), controls, str(verdict[0]))


def greedy_success_rate(v, spec: SystemSpec, n: int = 200, margin: float = 1e-3, seed: int = 0,
                        horizon: int = 10 ** 5, M: int = 101) -> tuple[float, int]:
    """Share of sampled starts with v > margin whose greedy rollout reaches T inside X."""
    vp = _as_poly(v)
    rng = np.random.default_rng(seed)
    X = safe_set(spec)
    starts = []
    for _ in range(100):
        pts = sample_uniform(X, 20 * n, rng)
        starts.append(pts[vp.evaluate_array(pts, spec.state_vars) > margin])
        if sum(len(s) for s in starts) >= n:
            break
    starts = np.concatenate(starts)[:n]
    if len(starts) == 0:
        return float("nan"), 0
    verdict, _, _ = simulate_many(vp, spec, starts, horizon, M)
    return float(np.mean(verdict == "reached")), len(starts)


# ---------------------------------------------------------------------------
# level-set export


def levelset_grid(v, spec, resolution: int = 101, dims: tuple[int, int] | None = None,
                  fixed: Sequence[float] | None = None):
    """Values of v on a regular grid over the bounding box of the safe set (or domain).

    Returns ``(coords, values)``; for n > 2 only the two ``dims`` vary and the
    other coordinates are held at ``fixed`` (default: box centre).
    """
    vp = _as_poly(v)
    region = _region_of(spec)
    lo, hi = region.box
    n = spec.n
    if n == 1:
        xs = np.linspace(lo[0], hi[0], resolution)[:, None]
        return xs, vp.evaluate_array(xs, spec.state_vars)
    dims = dims or (0, 1)
    base = np.array(fixed, dtype=float) if fixed is not None else 0.5 * (lo + hi)
    a = np.linspace(lo[dims[0]], hi[dims[0]], resolution)
    b = np.linspace(lo[dims[1]], hi[dims[1]], resolution)
    A, B = np.meshgrid(a, b, indexing="ij")
    pts = np.tile(base, (A.size, 1))
    pts[:, dims[0]] = A.ravel()
    pts[:, dims[1]] = B.ravel()
    return pts, vp.evaluate_array(pts, spec.state_vars)


def write_levelset_csv(path, v, spec, resolution: int = 101, dims=None, fixed=None) -> int:
    pts, vals = levelset_grid(v, spec, resolution, dims, fixed)
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(spec.state_vars) + ["v", "sign"])
        for p, val in zip(pts, vals):
            w.writerow([repr(float(c)) for c in p] + [repr(float(val)), int(np.sign(val))])
    return len(vals)


def positive_intervals(v, spec, resolution: int = 200_001) -> list[tuple[float, float]]:
    """Maximal intervals of a 1-D safe set's bounding box on which v > 0 (grid resolution)."""
    if spec.n != 1:
        raise ValueError("intervals are only defined for one state variable")
    xs, vals = levelset_grid(v, spec, resolution)
    xs = xs[:, 0]
    pos = vals > 0
    out = []
    i = 0
    while i < len(xs):
        if pos[i]:
            j = i
            while j + 1 < len(xs) and pos[j + 1]:
                j += 1
            out.append((float(xs[i]), float(xs[j])))
            i = j + 1
        else:
            i += 1
    return out
