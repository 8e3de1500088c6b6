"""Synthesis: initial reach-avoid certificate, controller fitting, epsilon-greedy
refinement, the iterative enlargement loop, and barrier certificates for safety.

All programs are assembled in box-normalised coordinates ``x = c + r*y`` so the
unit box holds the region of interest; certificates are mapped back.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .expect import EpsGreedyParams, expect_eps_greedy_basis, expect_uniform_basis, greedy_basis
from .polycore import Polynomial, interval_range, monomial_basis
from .sdpsolve import SdpSolution, SolverOptions, solve as sdp_solve
from .semisets import (BoxSet, SublevelSet, UnsupportedSetError, bounding_box, compute_xhat, domain_set,
                       init_set, monomial_moment, safe_set, sample_uniform, target_set, unsafe_set)
from .soscomp import CONST, AffinePoly, Certificate, DecisionPoly, ResidualError, SosProgram
from .specio import SafetySpec, SolveConfig, SystemSpec

log = logging.getLogger(__name__)

SAFETY_INIT_MARGIN = 1.0
CONTROLLER_BOX_MARGIN = 1e-5


class SynthesisError(RuntimeError):
    """The SOS program could not be solved or its solution failed the checks."""

    def __init__(self, message: str, status: str = "numerical_failure", diagnostics: dict | None = None):
        super().__init__(message)
        self.status = status
        self.diagnostics = diagnostics or {}


def _ceil_even(k: int) -> int:
    return max(0, k + (k % 2))


# ---------------------------------------------------------------------------
# coordinate normalisation


@dataclass(frozen=True)
class Normalizer:
    """Affine change of state coordinates ``x = centre + radius * y`` (same names)."""

    variables: tuple[str, ...]
    centre: np.ndarray
    radius: np.ndarray

    @classmethod
    def identity(cls, variables) -> "Normalizer":
        n = len(variables)
        return cls(tuple(variables), np.zeros(n), np.ones(n))

    @classmethod
    def from_box(cls, variables, box) -> "Normalizer":
        lo, hi = box
        return cls(tuple(variables), 0.5 * (lo + hi), 0.5 * (hi - lo))

    def to_scaled(self, p: Polynomial) -> Polynomial:
        """``p(c + r*y)`` as a polynomial in y."""
        images = {v: Polynomial({(0,): c, (1,): r}, (v,)) for v, c, r in zip(self.variables, self.centre, self.radius)}
        return p.substitute(images)

    def from_scaled(self, p: Polynomial) -> Polynomial:
        """``p((x - c)/r)`` as a polynomial in x."""
        images = {v: Polynomial({(0,): -c / r, (1,): 1.0 / r}, (v,))
                  for v, c, r in zip(self.variables, self.centre, self.radius)}
        return p.substitute(images)

    def dynamics(self, f: Sequence[Polynomial]) -> list[Polynomial]:
        return [(self.to_scaled(fi) - c).scale(1.0 / r) for fi, c, r in zip(f, self.centre, self.radius)]

    def points_to_scaled(self, pts: np.ndarray) -> np.ndarray:
        return (pts - self.centre) / self.radius


def _normalise_set_poly(p: Polynomial) -> Polynomial:
    big = max((abs(c) for c in p.terms.values()), default=1.0)
    return p.scale(1.0 / big) if big > 0 else p


def _scaled_box(poly_or_polys, variables, fallback=None):
    polys = [poly_or_polys] if isinstance(poly_or_polys, Polynomial) else list(poly_or_polys)
    box = bounding_box([p.with_variables(variables) for p in polys], variables)
    if box is None:
        box = fallback
    return {v: (float(a), float(b)) for v, a, b in zip(variables, *box)}


def residual_bound(r: Polynomial, box: dict) -> float:
    """Largest |r| over the box, by interval arithmetic (0 for the zero polynomial)."""
    if r.is_zero():
        return 0.0
    lo, hi = interval_range(r, box)
    return max(abs(lo), abs(hi))


# ---------------------------------------------------------------------------
# reach-avoid context


@dataclass
class ReachAvoidContext:
    spec: SystemSpec
    cfg: SolveConfig
    norm: Normalizer
    f: list[Polynomial]              # scaled dynamics over state + input vars
    h: Polynomial
    g: Polynomial
    hhat: Polynomial
    box_x: dict
    box_xhat: dict
    weights: dict                     # basis exponent -> objective weight

    @property
    def variables(self) -> tuple[str, ...]:
        return self.spec.state_vars


def make_context(spec: SystemSpec, cfg: SolveConfig) -> ReachAvoidContext:
    X = safe_set(spec)
    norm = Normalizer.from_box(spec.state_vars, X.box) if cfg.scale else Normalizer.identity(spec.state_vars)
    hhat_orig = spec.xhat_h if spec.xhat_h is not None else compute_xhat(spec)
    h = _normalise_set_poly(norm.to_scaled(spec.safe_h).with_variables(spec.state_vars))
    g = _normalise_set_poly(norm.to_scaled(spec.target_g).with_variables(spec.state_vars))
    hhat = _normalise_set_poly(norm.to_scaled(hhat_orig).with_variables(spec.state_vars))
    f = [p.with_variables(spec.state_vars + spec.input_vars) for p in norm.dynamics(spec.dynamics)]
    unit = (-np.ones(spec.n), np.ones(spec.n))
    box_x = _scaled_box(h, spec.state_vars, unit)
    box_xhat = _scaled_box(hhat, spec.state_vars)
    weights = objective_weights(spec, cfg, norm, h)
    return ReachAvoidContext(spec, cfg, norm, f, h, g, hhat, box_x, box_xhat, weights)


def objective_weights(spec: SystemSpec, cfg: SolveConfig, norm: Normalizer, h_scaled: Polynomial) -> dict:
    """Integral of every basis monomial of v over the (scaled) safe set, or a sample sum."""
    basis = monomial_basis(spec.state_vars, cfg.deg_v)
    region = SublevelSet.build(h_scaled, spec.state_vars, True)
    if cfg.objective_mode == "closed_form":
        try:
            return {e: monomial_moment(region, e) for e in basis}
        except UnsupportedSetError:
            log.info("no closed-form moments for this safe set; using a sample sum")
    X = safe_set(spec)
    pts = norm.points_to_scaled(sample_uniform(X, cfg.objective_samples, cfg.rng_seed))
    out = {}
    for e in basis:
        out[e] = float(np.sum(np.prod(pts ** np.array(e), axis=1)))
    return out


def _expectation_affine(template: DecisionPoly, expectations: Sequence[Polynomial], variables) -> AffinePoly:
    terms: dict = {}
    for cid, q in zip(template.coeff_ids, expectations):
        q = q.with_variables(variables)
        for e, c in q.terms.items():
            d = terms.setdefault(e, {})
            d[cid] = d.get(cid, 0.0) + c
    return AffinePoly(variables, terms)


def _multiplier_degree(expr_degree: int, constraint: Polynomial, cfg: SolveConfig) -> int:
    auto = _ceil_even(expr_degree - constraint.degree())
    floor = cfg.deg_multipliers if cfg.deg_multipliers is not None else _ceil_even(cfg.deg_v)
    return max(auto, floor)


def _solver_options(cfg: SolveConfig) -> SolverOptions:
    return SolverOptions()


def _run_sdp(prog: SosProgram, cfg: SolveConfig, solver: Callable | None = None) -> tuple:
    t0 = time.perf_counter()
    sdp = prog.compile()
    sol = (solver or (lambda p: sdp_solve(p, _solver_options(cfg))))(sdp)
    elapsed = time.perf_counter() - t0
    stats = dict(rows=sdp.m, blocks=list(sdp.blocks), iterations=sol.iterations, status=sol.status,
                 seconds=elapsed, primal_residual=sol.primal_residual, dual_residual=sol.dual_residual,
                 rel_gap=sol.rel_gap)
    if sol.status not in ("optimal", "feasible", "inaccurate"):
        raise SynthesisError(f"SDP solve ended with status {sol.status}: {sol.message}", sol.status, stats)
    try:
        pv = prog.extract(sol)
    except ResidualError as exc:
        raise SynthesisError(str(exc), "numerical_failure", stats) from None
    return sol, pv, stats


def _reach_avoid_program(ctx: ReachAvoidContext, expectations: Callable[[list], list[Polynomial]]):
    spec, cfg = ctx.spec, ctx.cfg
    prog = SosProgram(spec.state_vars, cfg.coeff_bound)
    v = prog.new_template(cfg.deg_v)
    Ev = expectations(list(v.basis))
    vaff = v.affine()
    row1 = _expectation_affine(v, Ev, spec.state_vars).iadd(vaff, -spec.lam)
    d1 = max(row1.degree(), cfg.deg_v)
    s1 = prog.new_sos(_multiplier_degree(d1, ctx.h, cfg))
    s2 = prog.new_sos(_multiplier_degree(d1, ctx.g, cfg))
    row1.iadd(s1.affine().times(ctx.h)).iadd(s2.affine().times(ctx.g), -1.0)
    prog.add_sos(row1, "decrease")
    s3 = prog.new_sos(_multiplier_degree(cfg.deg_v, ctx.hhat, cfg))
    s4 = prog.new_sos(_multiplier_degree(cfg.deg_v, ctx.h, cfg))
    row2 = vaff.scale(-1.0).iadd(s3.affine().times(ctx.hhat)).iadd(s4.affine().times(ctx.h), -1.0)
    prog.add_sos(row2, "outside")
    prog.set_objective_integral(v, ctx.weights)
    return prog, v, dict(s1=s1, s2=s2, s3=s3, s4=s4)


def _finish_reach_avoid(ctx: ReachAvoidContext, prog, v, mults, sol, pv, stats, kind, params,
                        controller=None) -> Certificate:
    spec = ctx.spec
    decrease, outside = prog.identities
    b1 = residual_bound(pv.repaired_residual(decrease), ctx.box_x)
    b2 = residual_bound(pv.repaired_residual(outside), ctx.box_xhat)
    shift = max(b1 / (spec.lam - 1.0), b2)
    shift = shift * 1.01 + 1e-14 if shift > 0 else 0.0
    v_scaled = pv.poly(v) - shift
    v_orig = ctx.norm.from_scaled(v_scaled).with_variables(spec.state_vars)
    mult_orig = {k: ctx.norm.from_scaled(pv.sos_poly(g)).with_variables(spec.state_vars)
                 for k, g in mults.items()}
    objective = sum(pv.values[i] * ctx.weights[e] for e, i in zip(v.basis, v.coeff_ids))
    p = dict(params)
    p["sdp"] = {k: (round(val, 12) if isinstance(val, float) else val) for k, val in stats.items()
                if k != "seconds"}
    p["residual_bounds"] = [b1, b2]
    cert = Certificate(kind=kind, v=v_orig, lam=spec.lam, multipliers=mult_orig, status=sol.status,
                       solver_iters=sol.iterations, objective_value=float(objective), shift=shift,
                       controller=controller, params=p)
    cert._seconds = stats["seconds"]  # not serialised
    return cert


# ---------------------------------------------------------------------------
# public operations


def solve_initial(spec: SystemSpec, cfg: SolveConfig | None = None, *, solver=None) -> Certificate:
    """Certificate v with E_u[v(f)] - lam v >= 0 on X\\T (u uniform on U) and v <= 0 on Xhat\\X."""
    cfg = cfg or SolveConfig()
    ctx = make_context(spec, cfg)
    ubox = spec.ubox
    prog, v, mults = _reach_avoid_program(
        ctx, lambda basis: expect_uniform_basis(basis, spec.state_vars, ctx.f, ubox))
    sol, pv, stats = _run_sdp(prog, cfg, solver)
    return _finish_reach_avoid(ctx, prog, v, mults, sol, pv, stats, "reach_avoid",
                               {"mode": "uniform", "deg_v": cfg.deg_v})


def build_initial_program(spec: SystemSpec, cfg: SolveConfig | None = None) -> SosProgram:
    cfg = cfg or SolveConfig()
    ctx = make_context(spec, cfg)
    return _reach_avoid_program(
        ctx, lambda basis: expect_uniform_basis(basis, spec.state_vars, ctx.f, spec.ubox))[0]


@dataclass
class ArgmaxDataset:
    states: np.ndarray
    controls: np.ndarray
    grid_sizes: tuple[int, int]
    source: str = ""

    @property
    def pairs(self):
        return list(zip(self.states, self.controls))


def control_grid(ubox: BoxSet, M: int) -> np.ndarray:
    axes = [np.linspace(a, b, M) for a, b in zip(ubox.lower, ubox.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def sample_states(spec: SystemSpec, N: int, seed: int, mode: str = "random") -> np.ndarray:
    """States in X\\T: ``N`` uniform draws, or an N-per-axis grid over the box of X."""
    X = safe_set(spec)
    if mode == "grid":
        lo, hi = X.box
        axes = [np.linspace(a, b, N + 2)[1:-1] for a, b in zip(lo, hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
    elif mode == "random":
        rng = np.random.default_rng(seed)
        chunks, have = [], 0
        for _ in range(1000):
            cand = sample_uniform(X, max(4 * N, 64), rng)
            keep = cand[spec.target_g.evaluate_array(cand, spec.state_vars) >= 0]
            chunks.append(keep)
            have += len(keep)
            if have >= N:
                break
        pts = np.concatenate(chunks)[:N]
    else:
        raise ValueError(f"unknown state sampling mode {mode!r}")
    keep = (spec.safe_h.evaluate_array(pts, spec.state_vars) < 0) & \
           (spec.target_g.evaluate_array(pts, spec.state_vars) >= 0)
    return pts[keep]


def gen_argmax_data(v: Polynomial | Certificate, spec: SystemSpec, N: int, M: int, seed: int = 0,
                    mode: str = "random") -> ArgmaxDataset:
    """For each sampled state pick the grid control maximising v(f(x, u)); ties go to the first."""
    if N < 1 or M < 2:
        raise ValueError("need N >= 1 states and M >= 2 controls per axis")
    vp = v.v if isinstance(v, Certificate) else v
    states = sample_states(spec, N, seed, mode)
    if len(states) == 0:
        raise SynthesisError("no state samples found in X\\T", "input_error")
    U = control_grid(spec.ubox, M)
    controls = argmax_controls(vp, spec, states, U)
    return ArgmaxDataset(states, controls, (N, M), source=vp.render())


def argmax_controls(v: Polynomial, spec, states: np.ndarray, U: np.ndarray) -> np.ndarray:
    n, m = spec.n, spec.m
    K = len(U)
    pts = np.concatenate([np.repeat(states, K, axis=0), np.tile(U, (len(states), 1))], axis=1)
    allv = spec.state_vars + spec.input_vars
    nxt = np.stack([fi.evaluate_array(pts, allv) for fi in spec.dynamics], axis=1)
    vals = v.evaluate_array(nxt, spec.state_vars).reshape(len(states), K)
    return U[np.argmax(vals, axis=1)]


@dataclass
class ControllerFit:
    u_tilde: tuple[Polynomial, ...]          # original coordinates
    u_scaled: tuple[Polynomial, ...]         # normalised coordinates
    coeffs: np.ndarray
    fit_residual: float
    ubox_shrunk: BoxSet
    delta: float
    status: str = "optimal"
    box_margin: float = 0.0


def fit_controller(data: ArgmaxDataset, spec: SystemSpec, degree: int, delta: float,
                   cfg: SolveConfig | None = None, *, solver=None) -> ControllerFit:
    """Least-squares polynomial controller constrained to [lower+delta, upper-delta] on X\\T."""
    cfg = cfg or SolveConfig()
    ubox = spec.ubox
    half = 0.5 * float(np.min(ubox.upper - ubox.lower))
    if not 0 < delta < half:
        raise ValueError(f"delta must lie in (0, {half})")
    if len(data.states) == 0:
        raise ValueError("empty dataset")
    ctx_norm = (Normalizer.from_box(spec.state_vars, safe_set(spec).box) if cfg.scale
                else Normalizer.identity(spec.state_vars))
    h = _normalise_set_poly(ctx_norm.to_scaled(spec.safe_h).with_variables(spec.state_vars))
    g = _normalise_set_poly(ctx_norm.to_scaled(spec.target_g).with_variables(spec.state_vars))
    n, m = spec.n, spec.m
    basis = monomial_basis(spec.state_vars, degree)
    Y = ctx_norm.points_to_scaled(data.states)
    Phi = np.stack([np.prod(Y ** np.array(e), axis=1) for e in basis], axis=1)
    Q, R = np.linalg.qr(Phi, mode="reduced")
    Uobs = np.asarray(data.controls, dtype=float).reshape(len(Y), m)
    QtU = Q.T @ Uobs
    const_part = float(np.sum(Uobs ** 2) - np.sum(QtU ** 2))

    prog = SosProgram(spec.state_vars, cfg.coeff_bound)
    comps = [prog.new_template(degree) for _ in range(m)]
    # epigraph block [[I, w], [w', t]] with w = R a_j - Q'u_j stacked over inputs
    k = R.shape[0]
    size = m * k + 1
    entries = [[{} for _ in range(size)] for _ in range(size)]
    for i in range(m * k):
        entries[i][i] = {CONST: 1.0}
    t_id = None
    for j, tmpl in enumerate(comps):
        for r in range(k):
            form = {CONST: -float(QtU[r, j])}
            for col, cid in enumerate(tmpl.coeff_ids):
                if R[r, col] != 0:
                    form[cid] = float(R[r, col])
            entries[j * k + r][size - 1] = form
            entries[size - 1][j * k + r] = form
    blk = prog.add_psd_affine(entries, "fit")
    t_id = prog.block_entry_id(blk, size - 1, size - 1)
    # the last diagonal entry is free (t); drop its equality
    prog.equalities = [e for e in prog.equalities if e[2] != f"fit[{size - 1},{size - 1}]"]

    lo_hat = ubox.lower + delta
    hi_hat = ubox.upper - delta
    marg = CONTROLLER_BOX_MARGIN * (ubox.upper - ubox.lower)
    for j, tmpl in enumerate(comps):
        a = tmpl.affine()
        for sign, bound in ((1.0, lo_hat[j] + marg[j]), (-1.0, hi_hat[j] - marg[j])):
            row = a.scale(sign).iadd(Polynomial.const(-sign * bound, spec.state_vars))
            d = max(degree, 2)
            s_h = prog.new_sos(_multiplier_degree(d, h, cfg))
            s_g = prog.new_sos(_multiplier_degree(d, g, cfg))
            row.iadd(s_h.affine().times(h)).iadd(s_g.affine().times(g), -1.0)
            prog.add_sos(row, f"box{j}{'lo' if sign > 0 else 'hi'}")
    prog.maximize({t_id: -1.0})
    sol, pv, stats = _run_sdp(prog, cfg, solver)
    u_scaled = tuple(pv.poly(t).with_variables(spec.state_vars) for t in comps)
    u_orig = tuple(ctx_norm.from_scaled(p).with_variables(spec.state_vars) for p in u_scaled)
    pred = Phi @ np.stack([pv.values[list(t.coeff_ids)] for t in comps], axis=1)
    resid = float(np.sum((pred - Uobs) ** 2))
    coeffs = np.concatenate([pv.values[list(t.coeff_ids)] for t in comps])
    margin = controller_box_margin(u_orig, spec, lo_hat, hi_hat, cfg.rng_seed)
    return ControllerFit(u_orig, u_scaled, coeffs, resid, BoxSet(lo_hat, hi_hat, spec.input_vars), delta,
                         sol.status, margin)


def controller_box_margin(u: Sequence[Polynomial], spec: SystemSpec, lower, upper, seed: int = 0,
                          n: int = 10_000) -> float:
    """Smallest slack of the controller against [lower, upper] on sampled points of X\\T."""
    pts = sample_states(spec, n, seed, "random")
    worst = np.inf
    for j, uj in enumerate(u):
        vals = uj.evaluate_array(pts, spec.state_vars)
        worst = min(worst, float(np.min(vals - lower[j])), float(np.min(upper[j] - vals)))
    return worst


def solve_refined(spec: SystemSpec, fit: ControllerFit, epsilon: "float | EpsGreedyParams",
                  delta: float | None = None, cfg: SolveConfig | None = None, *, greedy: bool = False,
                  solver=None) -> Certificate:
    """Refined certificate under the epsilon-greedy mixture around the fitted controller.

    ``epsilon`` may be a number or an :class:`EpsGreedyParams` (its controller
    is replaced by the fitted one).  With ``greedy=True`` the controller is
    substituted directly (the deterministic limit epsilon = delta = 0).
    """
    if isinstance(epsilon, EpsGreedyParams):
        epsilon, delta = epsilon.epsilon, epsilon.delta if delta is None else delta
    cfg = cfg or SolveConfig()
    if fit.box_margin < -1e-6:
        raise SynthesisError(f"fitted controller leaves the shrunk input box (margin {fit.box_margin:.3g})",
                             "input_error")
    ctx = make_context(spec, cfg)
    delta = fit.delta if delta is None else delta
    if greedy:
        ctrl = fit.u_scaled
        expectations = lambda basis: greedy_basis(basis, spec.state_vars, ctx.f, ctrl, spec.input_vars)
        params = {"mode": "greedy", "epsilon": 0.0, "delta": 0.0}
    else:
        ep = EpsGreedyParams(epsilon, delta, spec.ubox, fit.u_scaled)
        expectations = lambda basis: expect_eps_greedy_basis(basis, spec.state_vars, ctx.f, ep)
        params = {"mode": "eps_greedy", "epsilon": epsilon, "delta": delta, "Z": ep.Z}
    params["deg_v"] = cfg.deg_v
    prog, v, mults = _reach_avoid_program(ctx, expectations)
    sol, pv, stats = _run_sdp(prog, cfg, solver)
    return _finish_reach_avoid(ctx, prog, v, mults, sol, pv, stats, "reach_avoid", params,
                               controller=fit.u_tilde)


def build_refined_program(spec, fit, epsilon, delta=None, cfg=None) -> SosProgram:
    cfg = cfg or SolveConfig()
    ctx = make_context(spec, cfg)
    ep = EpsGreedyParams(epsilon, fit.delta if delta is None else delta, spec.ubox, fit.u_scaled)
    return _reach_avoid_program(ctx, lambda b: expect_eps_greedy_basis(b, spec.state_vars, ctx.f, ep))[0]


# ---------------------------------------------------------------------------
# iterative enlargement


@dataclass
class IterationConfig:
    K: int = 10
    eps0: float = 0.5
    schedule_factor: float = 0.8
    delta: float = 0.1
    deg_u: int = 2
    n_states: int = 50
    n_controls: int = 5
    state_mode: str = "grid"
    greedy: bool = False
    volume_samples: int = 100_000
    seed: int = 0
    solve: SolveConfig = field(default_factory=SolveConfig)

    def __post_init__(self):
        if self.K < 0:
            raise ValueError("K must be non-negative")
        if not 0 <= self.eps0 <= 1:
            raise ValueError("eps0 must lie in [0, 1]")
        if not 0 < self.schedule_factor <= 1:
            raise ValueError("schedule factor must lie in (0, 1]")

    def epsilon(self, k: int) -> float:
        """Epsilon used by the k-th refinement (k >= 1)."""
        return self.eps0 * self.schedule_factor ** (k - 1)


@dataclass
class IterationRecord:
    index: int
    epsilon: float | None
    status: str
    gamma: float
    union_gamma: float
    seconds: float
    fit_residual: float | None = None
    message: str = ""


@dataclass
class CrasResult:
    certificates: list[Certificate]
    records: list[IterationRecord]
    accepted: list[bool]

    def contains(self, pts: np.ndarray, variables) -> np.ndarray:
        out = np.zeros(len(pts), dtype=bool)
        for c, ok in zip(self.certificates, self.accepted):
            if ok:
                out |= c.v.evaluate_array(pts, variables) > 0
        return out

    @property
    def union_polys(self) -> list[Polynomial]:
        return [c.v for c, ok in zip(self.certificates, self.accepted) if ok]


def run_alg1(spec: SystemSpec, it: IterationConfig, *, solver=None,
             on_iteration: Callable[[int, Certificate, IterationRecord], None] | None = None) -> CrasResult:
    """Initial certificate, then K rounds of data, controller fit and refinement."""
    from .validate import union_volume, estimate_volume

    cfg = it.solve
    t0 = time.perf_counter()
    v0 = solve_initial(spec, cfg, solver=solver)
    g0 = estimate_volume(v0.v, spec, it.volume_samples, it.seed).gamma
    v0.gamma = g0
    certs, accepted = [v0], [True]
    recs = [IterationRecord(0, None, v0.status, g0, g0, time.perf_counter() - t0)]
    if on_iteration:
        on_iteration(0, v0, recs[-1])
    last = v0
    for k in range(1, it.K + 1):
        eps = 0.0 if it.greedy else it.epsilon(k)
        t1 = time.perf_counter()
        try:
            data = gen_argmax_data(last, spec, it.n_states, it.n_controls, it.seed + k, it.state_mode)
            fit = fit_controller(data, spec, it.deg_u, it.delta, cfg, solver=solver)
            cert = solve_refined(spec, fit, eps, it.delta, cfg, greedy=it.greedy, solver=solver)
            cert.gamma = estimate_volume(cert.v, spec, it.volume_samples, it.seed).gamma
            certs.append(cert)
            accepted.append(True)
            last = cert
            status, msg, res = cert.status, "", fit.fit_residual
        except SynthesisError as exc:
            log.warning("iteration %d failed: %s", k, exc)
            certs.append(last)
            accepted.append(False)
            status, msg, res = exc.status, str(exc), None
        ug = union_volume([c.v for c, ok in zip(certs, accepted) if ok], spec, it.volume_samples, it.seed).gamma
        rec = IterationRecord(k, eps, status, certs[-1].gamma, ug, time.perf_counter() - t1, res, msg)
        recs.append(rec)
        if on_iteration:
            on_iteration(k, certs[-1], rec)
    return CrasResult(certs, recs, accepted)


# ---------------------------------------------------------------------------
# safety


def solve_safety(spec: SafetySpec, cfg: SolveConfig | None = None, *, solver=None) -> Certificate:
    """Barrier B with E_u[B(f)] - lam B >= 0 on D, B <= 0 on X_U, B > 0 on X_I.

    The decrease and unsafe rows share a slack t <= 1 that is maximised, the
    initial row uses margin 1.  The interval bound of each repaired residual
    is compared against its margin; a certificate whose residual exceeds the
    margin is reported with ``params['sound'] = False``.
    """
    cfg = cfg or SolveConfig()
    D = domain_set(spec)
    norm = Normalizer.from_box(spec.state_vars, D.box) if cfg.scale else Normalizer.identity(spec.state_vars)
    V = spec.state_vars
    sc = lambda p: _normalise_set_poly(norm.to_scaled(p).with_variables(V))
    hD = [sc(p) for p in spec.domain]
    hI = [sc(p) for p in spec.init]
    hU = [sc(p) for p in spec.unsafe]
    f = [p.with_variables(V + spec.input_vars) for p in norm.dynamics(spec.dynamics)]
    unit = (-np.ones(spec.n), np.ones(spec.n))
    boxD = _scaled_box(hD, V, unit)
    boxI = _scaled_box(hI, V, (np.array([boxD[v][0] for v in V]), np.array([boxD[v][1] for v in V])))
    boxU = _scaled_box(hU + hD, V, (np.array([boxD[v][0] for v in V]), np.array([boxD[v][1] for v in V])))

    prog = SosProgram(V, cfg.coeff_bound)
    B = prog.new_template(cfg.deg_v)
    Baff = B.affine()
    EB = expect_uniform_basis(list(B.basis), V, f, spec.ubox)
    row1 = _expectation_affine(B, EB, V).iadd(Baff, -spec.lam)
    # a common slack on the decrease and unsafe rows, maximised; a pure
    # feasibility program with fixed margins has no interior to steer toward
    t = prog.new_scalar(lower=-1.0, upper=1.0)
    zero = (0,) * len(V)
    slack = AffinePoly(V, {zero: {t: -1.0}})
    row1.iadd(slack)
    d1 = max(row1.degree(), cfg.deg_v)
    mults = {}
    for i, p in enumerate(hD):
        s = prog.new_sos(_multiplier_degree(d1, p, cfg))
        mults[f"s1_{i}"] = s
        row1.iadd(s.affine().times(p))
    prog.add_sos(row1, "decrease")
    row2 = Baff.scale(-1.0).iadd(slack)
    for i, p in enumerate(hU):
        s = prog.new_sos(_multiplier_degree(cfg.deg_v, p, cfg))
        mults[f"s2_{i}"] = s
        row2.iadd(s.affine().times(p))
    # only the part of X_U inside D matters, which also bounds unbounded shells
    for i, p in enumerate(hD):
        s = prog.new_sos(_multiplier_degree(cfg.deg_v, p, cfg))
        mults[f"s2_D{i}"] = s
        row2.iadd(s.affine().times(p))
    prog.add_sos(row2, "unsafe")
    row3 = Baff.copy().iadd(Polynomial.const(-SAFETY_INIT_MARGIN, V))
    for i, p in enumerate(hI):
        s = prog.new_sos(_multiplier_degree(cfg.deg_v, p, cfg))
        mults[f"s3_{i}"] = s
        row3.iadd(s.affine().times(p))
    prog.add_sos(row3, "initial")
    prog.maximize({t: 1.0})
    sol, pv, stats = _run_sdp(prog, cfg, solver)
    margin = pv.scalar(t)
    if margin <= 0:
        raise SynthesisError(f"no barrier with a positive margin (best slack {margin:.3g})",
                             "infeasible", stats)
    dec, uns, ini = prog.identities
    b = [residual_bound(pv.repaired_residual(dec), boxD),
         residual_bound(pv.repaired_residual(uns), boxU),
         residual_bound(pv.repaired_residual(ini), boxI)]
    sound = b[0] < margin and b[1] < margin and b[2] < SAFETY_INIT_MARGIN
    Bx = norm.from_scaled(pv.poly(B)).with_variables(V)
    p = {"residual_bounds": b, "sound": bool(sound), "deg": cfg.deg_v,
         "margins": [round(margin, 12), round(margin, 12), SAFETY_INIT_MARGIN],
         "sdp": {k: (round(val, 12) if isinstance(val, float) else val) for k, val in stats.items()
                 if k != "seconds"}}
    cert = Certificate(kind="safety", v=Bx, lam=spec.lam,
                       multipliers={k: norm.from_scaled(pv.sos_poly(g)).with_variables(V) for k, g in mults.items()},
                       status=sol.status, solver_iters=sol.iterations, params=p)
    cert._seconds = stats["seconds"]
    return cert
