"""Primal-dual interior-point solver for block-diagonal SDPs.

Standard form::

    minimise    c'x + sum_j <C_j, X_j>
    subject to  A_lp x + sum_j A_j(X_j) = b,   x >= 0,   X_j PSD

with the dual ``max b'y  s.t.  z = c - A_lp'y >= 0,  Z_j = C_j - A_j*(y) PSD``.
Search directions use Nesterov-Todd scaling and Mehrotra's
predictor-corrector; the Schur complement is dense.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

log = logging.getLogger(__name__)

STATUSES = ("optimal", "feasible", "inaccurate", "infeasible", "numerical_failure", "iteration_limit")


# ---------------------------------------------------------------------------
# problem and solution containers


@dataclass
class SdpProblem:
    """Sparse SDP data.

    ``A_psd[j]`` holds arrays ``(rows, i, k, vals)`` with ``i <= k``: row ``r``
    gains ``val * X_j[i, k]`` (each unordered pair listed once).  ``C_psd[j]``
    holds ``(i, k, vals)`` with the same convention.
    """

    b: np.ndarray
    blocks: list[int] = field(default_factory=list)
    A_psd: list[tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = field(default_factory=list)
    C_psd: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = field(default_factory=list)
    n_lp: int = 0
    A_lp: sp.csr_matrix | None = None
    c_lp: np.ndarray | None = None
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        m = len(self.b)
        if self.A_lp is None:
            self.A_lp = sp.csr_matrix((m, self.n_lp))
        self.A_lp = sp.csr_matrix(self.A_lp)
        if self.c_lp is None:
            self.c_lp = np.zeros(self.n_lp)
        self.c_lp = np.asarray(self.c_lp, dtype=float)
        if self.A_lp.shape != (m, self.n_lp) or self.c_lp.shape != (self.n_lp,):
            raise ValueError("LP data has inconsistent shape")
        if len(self.A_psd) != len(self.blocks) or len(self.C_psd) != len(self.blocks):
            raise ValueError("need constraint and cost data for every PSD block")
        for k, (rows, i, j, _), (ci, cj, _) in zip(self.blocks, self.A_psd, self.C_psd):
            if k < 1:
                raise ValueError("block dimensions must be positive")
            for arr in (i, j, ci, cj):
                if len(arr) and (np.min(arr) < 0 or np.max(arr) >= k):
                    raise ValueError("block index out of range")
            if len(rows) and (np.min(rows) < 0 or np.max(rows) >= m):
                raise ValueError("row index out of range")

    @property
    def m(self) -> int:
        return len(self.b)

    def to_text(self) -> str:
        """One line per nonzero: ``row var-id value``; var ids are ``lp:<k>`` or ``X<j>:<i>,<k>``."""
        lines = [f"# rows {self.m} lp {self.n_lp} blocks {' '.join(map(str, self.blocks))}"]
        coo = self.A_lp.tocoo()
        ent = []
        for r, c, v in zip(coo.row, coo.col, coo.data):
            ent.append((int(r), f"lp:{int(c)}", float(v)))
        for j, (rows, ii, kk, vals) in enumerate(self.A_psd):
            for r, i, k, v in zip(rows, ii, kk, vals):
                a, c = (int(i), int(k)) if i <= k else (int(k), int(i))
                ent.append((int(r), f"X{j}:{a},{c}", float(v)))
        ent.sort(key=lambda e: (e[0], e[1]))
        lines += [f"{r} {name} {v!r}" for r, name, v in ent]
        lines += [f"b {r} {v!r}" for r, v in enumerate(self.b) if v]
        lines += [f"c lp:{k} {v!r}" for k, v in enumerate(self.c_lp) if v]
        for j, (ii, kk, vals) in enumerate(self.C_psd):
            lines += [f"c X{j}:{min(i, k)},{max(i, k)} {float(v)!r}" for i, k, v in zip(ii, kk, vals)]
        return "\n".join(lines) + "\n"


@dataclass
class SdpSolution:
    status: str
    x_lp: np.ndarray
    X: list[np.ndarray]
    y: np.ndarray
    z_lp: np.ndarray
    Z: list[np.ndarray]
    primal_objective: float
    dual_objective: float
    primal_residual: float
    dual_residual: float
    rel_gap: float
    iterations: int
    history: list[dict] = field(default_factory=list)
    ray: np.ndarray | None = None
    message: str = ""


# ---------------------------------------------------------------------------
# linear operators


class _Ops:
    """Row-scaled operator data in CSR form, one ``m x k^2`` matrix per block."""

    def __init__(self, prob: SdpProblem, row_scale: np.ndarray):
        self.m = prob.m
        self.blocks = list(prob.blocks)
        D = sp.diags(row_scale)
        self.A_lp = (D @ prob.A_lp).tocsr()
        self.A_lpT = self.A_lp.T.tocsr()
        self.P = []
        for k, (rows, ii, kk, vals) in zip(prob.blocks, prob.A_psd):
            lo = np.minimum(ii, kk)
            hi = np.maximum(ii, kk)
            P = sp.csr_matrix((np.asarray(vals, float) * row_scale[rows], (rows, lo * k + hi)),
                              shape=(self.m, k * k))
            P.sum_duplicates()
            P.eliminate_zeros()
            self.P.append(P)
        self.PT = [P.T.tocsr() for P in self.P]

    def A(self, x, Xs):
        out = self.A_lp @ x if self.A_lp.shape[1] else np.zeros(self.m)
        for P, X in zip(self.P, Xs):
            out = out + P @ X.ravel()
        return out

    def At(self, y):
        zl = self.A_lpT @ y if self.A_lp.shape[1] else np.zeros(0)
        Zs = []
        for PT, k in zip(self.PT, self.blocks):
            Q = (PT @ y).reshape(k, k)
            Zs.append(0.5 * (Q + Q.T))
        return zl, Zs

    def schur(self, d2, Ws, chunk: int = 64):
        """``M[r, s] = <A_r, W A_s W>`` summed over blocks, plus the LP term."""
        m = self.m
        M = np.zeros((m, m))
        if self.A_lp.shape[1]:
            M += (self.A_lp @ sp.diags(d2) @ self.A_lpT).toarray()
        for P, W, k in zip(self.P, Ws, self.blocks):
            active = np.flatnonzero(np.diff(P.indptr))
            for start in range(0, len(active), chunk):
                rows = active[start:start + chunk]
                Ys = np.empty((len(rows), k * k))
                for t, s in enumerate(rows):
                    lo, hi = P.indptr[s], P.indptr[s + 1]
                    flat = P.indices[lo:hi]
                    vals = P.data[lo:hi]
                    I, L = np.divmod(flat, k)
                    Yh = (W[:, I] * (0.5 * vals)) @ W[L, :]
                    Ys[t] = (Yh + Yh.T).ravel()
                M[:, rows] += (P @ Ys.T)
        return 0.5 * (M + M.T)


def _inner(a_lp, A, b_lp, B) -> float:
    return float(a_lp @ b_lp) + sum(float(np.vdot(X, Y)) for X, Y in zip(A, B))


def _dense_cost(prob: SdpProblem) -> list[np.ndarray]:
    out = []
    for k, (ii, kk, vals) in zip(prob.blocks, prob.C_psd):
        C = np.zeros((k, k))
        for i, j, v in zip(ii, kk, vals):
            if i == j:
                C[i, i] += v
            else:
                C[i, j] += 0.5 * v
                C[j, i] += 0.5 * v
        out.append(C)
    return out


# ---------------------------------------------------------------------------
# Nesterov-Todd scaling


def _chol(X: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(0.5 * (X + X.T))
        w = np.maximum(w, 1e-300)
        return V * np.sqrt(w)


def _nt_scaling(X: np.ndarray, Z: np.ndarray):
    """``G`` with ``G^-1 X G^-T = G' Z G = diag(lam)``; returns ``G, G^-1, lam``."""
    L = _chol(X)
    R = _chol(Z)
    U, d, Vt = np.linalg.svd(R.T @ L)
    d = np.maximum(d, 1e-300)
    G = (L @ Vt.T) / np.sqrt(d)
    Ginv = (np.sqrt(d)[:, None] * Vt) @ sla.solve_triangular(L, np.eye(len(d)), lower=True)
    return G, Ginv, d


def _max_step(lam: np.ndarray, dS: np.ndarray) -> float:
    """Largest alpha with diag(lam) + alpha dS PSD."""
    s = 1.0 / np.sqrt(lam)
    ev = np.linalg.eigvalsh((s[:, None] * dS) * s[None, :])
    lo = ev[0]
    return np.inf if lo >= 0 else -1.0 / lo


def _max_step_lp(lam: np.ndarray, ds: np.ndarray) -> float:
    neg = ds < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-lam[neg] / ds[neg]))


# ---------------------------------------------------------------------------
# solver


@dataclass
class SolverOptions:
    tol: float = 1e-8
    max_iters: int = 200
    step_fraction: float = 0.98
    stall_iters: int = 8
    optimal_tol: float = 1e-7
    feasible_tol: float = 1e-6
    ray_tol: float = 1e-6
    # a stalled point this close to feasible is returned for a posteriori checking
    inaccurate_tol: float = 1e-4
    verbose: bool = False


def solve(prob: SdpProblem, opts: SolverOptions | None = None, **kw) -> SdpSolution:
    opts = opts or SolverOptions(**kw)
    m = prob.m
    nb = len(prob.blocks)
    C_orig = _dense_cost(prob)
    if m == 0:
        # nothing constrains the cone: the origin is optimal iff the cost is PSD
        return SdpSolution("optimal", np.zeros(prob.n_lp), [np.zeros((k, k)) for k in prob.blocks],
                           np.zeros(0), prob.c_lp.copy(), C_orig, 0.0, 0.0, 0.0, 0.0, 0.0, 0)

    # row normalisation then b / C scaling
    ops0 = _Ops(prob, np.ones(m))
    row_norm = np.sqrt(np.asarray(ops0.A_lp.multiply(ops0.A_lp).sum(axis=1)).ravel()
                       + sum(np.asarray(P.multiply(P).sum(axis=1)).ravel() for P in ops0.P))
    row_scale = 1.0 / np.maximum(row_norm, 1e-12)
    row_scale[row_norm == 0] = 1.0
    ops = _Ops(prob, row_scale)
    b_s = prob.b * row_scale
    bscale = max(1.0, float(np.linalg.norm(b_s)))
    cnorm = np.sqrt(float(prob.c_lp @ prob.c_lp) + sum(float(np.vdot(C, C)) for C in C_orig))
    cscale = max(1.0, cnorm)
    b = b_s / bscale
    c = prob.c_lp / cscale
    Cs = [C / cscale for C in C_orig]
    normb = float(np.linalg.norm(b))
    normC = np.sqrt(float(c @ c) + sum(float(np.vdot(C, C)) for C in Cs))

    # large-identity start
    n_lp = prob.n_lp
    x = np.zeros(n_lp)
    z = np.zeros(n_lp)
    if n_lp:
        arow = np.sqrt(np.asarray(ops.A_lp.multiply(ops.A_lp).sum(axis=0)).ravel())
        xi = max(10.0, np.sqrt(n_lp), n_lp * float(np.max((1 + np.abs(b)).max() / (1 + arow))))
        eta = max(10.0, np.sqrt(n_lp), float(arow.max(initial=0.0)), float(np.linalg.norm(c)))
        x = np.full(n_lp, xi)
        z = np.full(n_lp, eta)
    Xs, Zs = [], []
    for j, k in enumerate(prob.blocks):
        P = ops.P[j]
        pn = np.sqrt(np.asarray(P.multiply(P).sum(axis=1)).ravel())
        xi = max(10.0, np.sqrt(k), k * float(np.max((1 + np.abs(b)) / (1 + pn))))
        eta = max(10.0, np.sqrt(k), float(pn.max(initial=0.0)), float(np.linalg.norm(Cs[j])))
        Xs.append(np.eye(k) * xi)
        Zs.append(np.eye(k) * eta)
    y = np.zeros(m)
    nu = n_lp + sum(prob.blocks)

    history: list[dict] = []
    status = "iteration_limit"
    message = ""
    best = np.inf
    since_best = 0
    ray = None
    it = 0

    for it in range(opts.max_iters + 1):
        rp = b - ops.A(x, Xs)
        zl_y, Zy = ops.At(y)
        rd_lp = c - zl_y - z
        Rd = [C - Ay - Z for C, Ay, Z in zip(Cs, Zy, Zs)]
        gap = _inner(x, Xs, z, Zs)
        mu = gap / nu
        pobj = _inner(c, Cs, x, Xs)
        dobj = float(b @ y)
        pinf = float(np.linalg.norm(rp)) / (1 + normb)
        dinf = np.sqrt(float(rd_lp @ rd_lp) + sum(float(np.vdot(R, R)) for R in Rd)) / (1 + normC)
        relgap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        history.append(dict(iter=it, primal_objective=pobj * bscale * cscale,
                            dual_objective=dobj * bscale * cscale, gap=gap * bscale * cscale,
                            primal_residual=pinf, dual_residual=dinf, rel_gap=relgap, mu=mu))
        if opts.verbose:
            log.info("it %3d pobj %+.6e dobj %+.6e pinf %.1e dinf %.1e gap %.1e",
                     it, pobj, dobj, pinf, dinf, relgap)
        if max(pinf, dinf, relgap) <= opts.tol:
            status = "optimal"
            break
        if dobj > 0 and pinf > opts.tol:
            ray = _check_ray(prob, y * row_scale, opts.ray_tol)
            if ray is not None:
                status = "infeasible"
                message = "dual improving ray found"
                break
        score = max(pinf, dinf, relgap)
        if score < 0.9 * best:
            best = score
            since_best = 0
        else:
            since_best += 1
            if since_best >= opts.stall_iters:
                message = "progress stalled"
                status = "stalled"
                break
        if it == opts.max_iters:
            break

        # scaling
        Gs, Ginvs, lams, Ws = [], [], [], []
        for X, Z in zip(Xs, Zs):
            G, Gi, lam = _nt_scaling(X, Z)
            Gs.append(G)
            Ginvs.append(Gi)
            lams.append(lam)
            Ws.append(G @ G.T)
        d_lp = np.sqrt(x / z) if n_lp else np.zeros(0)
        lam_lp = np.sqrt(x * z) if n_lp else np.zeros(0)

        M = ops.schur(d_lp ** 2, Ws)
        factor = _factor(M)
        if factor is None:
            status = "numerical_failure"
            message = "Schur complement could not be factored"
            break

        def direction(Rt_lp, Rts):
            # rhs = rp - A(G Rt G' - W Rd W)
            xs_lp = d_lp * Rt_lp - d_lp ** 2 * rd_lp
            xs = [G @ Rt @ G.T - W @ R @ W for G, Rt, W, R in zip(Gs, Rts, Ws, Rd)]
            rhs = rp - ops.A(xs_lp, xs)
            dy = sla.cho_solve(factor, rhs)
            # one refinement step; M is badly conditioned near the optimum
            dy += sla.cho_solve(factor, rhs - M @ dy)
            at_lp, ats = ops.At(dy)
            dz = rd_lp - at_lp
            dZ = [R - A for R, A in zip(Rd, ats)]
            dx = d_lp * Rt_lp - d_lp ** 2 * dz
            dX = [G @ Rt @ G.T - W @ T @ W for G, Rt, W, T in zip(Gs, Rts, Ws, dZ)]
            dz_t = d_lp * dz
            dZ_t = [G.T @ T @ G for G, T in zip(Gs, dZ)]
            dx_t = Rt_lp - dz_t
            dX_t = [Rt - T for Rt, T in zip(Rts, dZ_t)]
            return dx, dX, dy, dz, dZ, dx_t, dX_t, dz_t, dZ_t

        def steps(dx_t, dX_t, dz_t, dZ_t):
            ap = min([_max_step_lp(lam_lp, dx_t)] + [_max_step(l, d) for l, d in zip(lams, dX_t)])
            ad = min([_max_step_lp(lam_lp, dz_t)] + [_max_step(l, d) for l, d in zip(lams, dZ_t)])
            return ap, ad

        try:
            aff = direction(-lam_lp, [-np.diag(l) for l in lams])
            ap, ad = steps(*aff[5:])
            ap, ad = min(1.0, ap), min(1.0, ad)
            gap_aff = _inner(x + ap * aff[0], [X + ap * d for X, d in zip(Xs, aff[1])],
                             z + ad * aff[3], [Z + ad * d for Z, d in zip(Zs, aff[4])])
            sigma = float(np.clip((gap_aff / gap) ** 3, 0.0, 1.0))
            smu = sigma * mu
            r_lp = smu - lam_lp ** 2 - aff[5] * aff[7]
            Rts = []
            for lam, dXa, dZa in zip(lams, aff[6], aff[8]):
                prod = dXa @ dZa
                r = smu * np.eye(len(lam)) - np.diag(lam ** 2) - 0.5 * (prod + prod.T)
                Rts.append(2.0 * r / (lam[:, None] + lam[None, :]))
            cor = direction(r_lp / np.where(lam_lp > 0, lam_lp, 1.0), Rts)
            ap, ad = steps(*cor[5:])
        except (np.linalg.LinAlgError, ValueError, FloatingPointError) as exc:
            status = "numerical_failure"
            message = f"linear algebra failure: {exc}"
            break
        ap = min(1.0, opts.step_fraction * ap)
        ad = min(1.0, opts.step_fraction * ad)
        if not (np.isfinite(ap) and np.isfinite(ad)) or max(ap, ad) < 1e-10:
            status = "numerical_failure"
            message = "step length collapsed"
            break
        dx, dX, dy, dz, dZ = cor[:5]
        x = x + ap * dx
        Xs = [X + ap * d for X, d in zip(Xs, dX)]
        Xs = [0.5 * (X + X.T) for X in Xs]
        y = y + ad * dy
        z = z + ad * dz
        Zs = [0.5 * (Z + ad * d + (Z + ad * d).T) for Z, d in zip(Zs, dZ)]
        history[-1].update(step_primal=ap, step_dual=ad, sigma=sigma)

    # map back to the caller's scaling
    x_o = x * bscale
    X_o = [X * bscale for X in Xs]
    y_o = y * row_scale * cscale
    z_o = z * cscale
    Z_o = [Z * cscale for Z in Zs]
    pinf, dinf, relgap, pobj, dobj = _residuals(prob, C_orig, x_o, X_o, y_o, z_o, Z_o)
    if status == "optimal" and max(pinf, dinf, relgap) > opts.optimal_tol:
        status = "feasible" if max(pinf, dinf) <= opts.feasible_tol else "numerical_failure"
    elif status in ("stalled", "iteration_limit"):
        if max(pinf, dinf, relgap) <= opts.optimal_tol:
            status = "optimal"
        elif max(pinf, dinf) <= opts.feasible_tol:
            status = "feasible"
        elif status == "stalled":
            ray = _check_ray(prob, y_o, opts.ray_tol) if dobj > 0 else None
            if ray is not None:
                status = "infeasible"
            elif max(pinf, dinf, relgap) <= opts.inaccurate_tol:
                status = "inaccurate"
            else:
                status = "numerical_failure"
    return SdpSolution(status, x_o, X_o, y_o, z_o, Z_o, pobj, dobj, pinf, dinf, relgap, it,
                       history, ray, message)


def _factor(M: np.ndarray):
    scale = max(1.0, float(np.max(np.abs(np.diag(M)))))
    reg = 0.0
    for _ in range(8):
        try:
            return sla.cho_factor(M + reg * np.eye(len(M)), lower=True, check_finite=True)
        except (np.linalg.LinAlgError, ValueError):
            reg = scale * (1e-14 if reg == 0 else reg / scale * 100)
    return None


def _residuals(prob, C_orig, x, Xs, y, z, Zs):
    ops = _Ops(prob, np.ones(prob.m))
    rp = prob.b - ops.A(x, Xs)
    zl, Zy = ops.At(y)
    rd = prob.c_lp - zl - z
    Rd = [C - A - Z for C, A, Z in zip(C_orig, Zy, Zs)]
    normC = np.sqrt(float(prob.c_lp @ prob.c_lp) + sum(float(np.vdot(C, C)) for C in C_orig))
    pinf = float(np.linalg.norm(rp)) / (1 + float(np.linalg.norm(prob.b)))
    dinf = np.sqrt(float(rd @ rd) + sum(float(np.vdot(R, R)) for R in Rd)) / (1 + normC)
    pobj = _inner(prob.c_lp, C_orig, x, Xs)
    dobj = float(prob.b @ y)
    return pinf, dinf, abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj)), pobj, dobj


def _check_ray(prob: SdpProblem, y: np.ndarray, tol: float) -> np.ndarray | None:
    """Return ``y / b'y`` if it certifies primal infeasibility to ``tol``."""
    by = float(prob.b @ y)
    if by <= 0:
        return None
    yh = y / by
    return yh if ray_violation(prob, yh) <= tol else None


def ray_violation(prob: SdpProblem, y: np.ndarray) -> float:
    """How far ``-A*(y)`` is from the cone (0 means a valid ray when ``b'y = 1``)."""
    ops = _Ops(prob, np.ones(prob.m))
    zl, Zs = ops.At(y)
    worst = 0.0
    if len(zl):
        worst = max(worst, float(np.max(zl)))
    for Z in Zs:
        worst = max(worst, float(np.linalg.eigvalsh(Z)[-1]))
    return worst


# ---------------------------------------------------------------------------
# SDPA text interchange


def write_sdpa(prob: SdpProblem, path: str | Path) -> None:
    """Write the problem in sparse SDPA form.

    Our problem is the SDPA "dual" ``max <F0, Y> s.t. <F_r, Y> = c_r`` with
    ``F0 = -C`` and ``F_r = A_r``; the LP cone becomes a diagonal block.
    """
    blocks = list(prob.blocks)
    sizes = [str(k) for k in blocks]
    lp_block = None
    if prob.n_lp:
        lp_block = len(blocks) + 1
        sizes.append(str(-prob.n_lp))
    lines = [f"{prob.m}", f"{len(sizes)}", " ".join(sizes), " ".join(repr(float(v)) for v in prob.b)]
    for j, (ii, kk, vals) in enumerate(prob.C_psd):
        for i, k, v in zip(ii, kk, vals):
            a, c = min(i, k), max(i, k)
            val = v if a == c else 0.5 * v
            lines.append(f"0 {j + 1} {a + 1} {c + 1} {-float(val)!r}")
    for k, v in enumerate(prob.c_lp):
        if v:
            lines.append(f"0 {lp_block} {k + 1} {k + 1} {-float(v)!r}")
    for j, (rows, ii, kk, vals) in enumerate(prob.A_psd):
        for r, i, k, v in zip(rows, ii, kk, vals):
            a, c = min(i, k), max(i, k)
            val = v if a == c else 0.5 * v
            lines.append(f"{r + 1} {j + 1} {a + 1} {c + 1} {float(val)!r}")
    coo = prob.A_lp.tocoo()
    for r, k, v in zip(coo.row, coo.col, coo.data):
        lines.append(f"{r + 1} {lp_block} {k + 1} {k + 1} {float(v)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_sdpa_solution(prob: SdpProblem, path: str | Path) -> SdpSolution:
    """Read a solution in the sparse format written by CSDP-style solvers.

    First line: ``y``; then ``1 blk i j val`` entries for the dual slack and
    ``2 blk i j val`` entries for the primal matrix.
    """
    text = Path(path).read_text().split("\n")
    y = np.array([float(t) for t in text[0].split()])
    if len(y) != prob.m:
        raise ValueError("solution has the wrong number of dual values")
    nb = len(prob.blocks)
    Xs = [np.zeros((k, k)) for k in prob.blocks]
    Zs = [np.zeros((k, k)) for k in prob.blocks]
    x = np.zeros(prob.n_lp)
    z = np.zeros(prob.n_lp)
    for line in text[1:]:
        parts = line.split()
        if len(parts) != 5:
            continue
        mat, blk, i, j = (int(p) for p in parts[:4])
        val = float(parts[4])
        blk -= 1
        i -= 1
        j -= 1
        if blk < nb:
            T = Zs[blk] if mat == 1 else Xs[blk]
            T[i, j] = T[j, i] = val
        else:
            (z if mat == 1 else x)[i] = val
    C_orig = _dense_cost(prob)
    # the file's y belongs to max <F0,Y>; our dual variable is its negative
    y = -y
    pinf, dinf, relgap, pobj, dobj = _residuals(prob, C_orig, x, Xs, y, z, Zs)
    status = "optimal" if max(pinf, dinf, relgap) <= 1e-7 else ("feasible" if pinf <= 1e-6 else "numerical_failure")
    return SdpSolution(status, x, Xs, y, z, Zs, pobj, dobj, pinf, dinf, relgap, 0, message="read from file")
