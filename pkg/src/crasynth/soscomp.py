"""Sum-of-squares programs: decision templates, Gram-matrix certificates, SDP compilation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .polycore import Polynomial, monomial_basis
from .sdpsolve import SdpProblem, SdpSolution

CONST = -1  # key of the constant part in an affine coefficient


class ResidualError(RuntimeError):
    """An SOS identity does not hold for the extracted values."""


def _add_into(dst: dict, src: Mapping, s: float = 1.0) -> None:
    for k, v in src.items():
        dst[k] = dst.get(k, 0.0) + s * v


class AffinePoly:
    """Polynomial whose coefficients are affine in decision variables.

    ``terms[exp] = {var_id: coeff, CONST: coeff}``.
    """

    __slots__ = ("variables", "terms")

    def __init__(self, variables: Sequence[str], terms: dict | None = None):
        self.variables = tuple(variables)
        self.terms: dict[tuple[int, ...], dict[int, float]] = terms or {}

    @classmethod
    def from_polynomial(cls, p: Polynomial, variables: Sequence[str]) -> "AffinePoly":
        p = p.with_variables(variables)
        return cls(variables, {e: {CONST: c} for e, c in p.terms.items()})

    def copy(self) -> "AffinePoly":
        return AffinePoly(self.variables, {e: dict(d) for e, d in self.terms.items()})

    def _check(self, other: "AffinePoly"):
        if other.variables != self.variables:
            raise ValueError("affine polynomials over different variables")

    def iadd(self, other: "AffinePoly | Polynomial", s: float = 1.0) -> "AffinePoly":
        if isinstance(other, Polynomial):
            other = AffinePoly.from_polynomial(other, self.variables)
        self._check(other)
        for e, d in other.terms.items():
            _add_into(self.terms.setdefault(e, {}), d, s)
        return self

    def __add__(self, other):
        return self.copy().iadd(other)

    def __sub__(self, other):
        return self.copy().iadd(other, -1.0)

    def __neg__(self):
        return self.scale(-1.0)

    def scale(self, s: float) -> "AffinePoly":
        return AffinePoly(self.variables, {e: {k: s * v for k, v in d.items()} for e, d in self.terms.items()})

    def times(self, p: Polynomial) -> "AffinePoly":
        """Multiply by a fixed polynomial."""
        p = p.with_variables(self.variables)
        out: dict = {}
        for e1, d in self.terms.items():
            for e2, c in p.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                _add_into(out.setdefault(e, {}), d, c)
        return AffinePoly(self.variables, out)

    def degree(self) -> int:
        degs = [sum(e) for e, d in self.terms.items() if any(v != 0 for v in d.values())]
        return max(degs, default=0)

    def value(self, values: np.ndarray) -> Polynomial:
        """Substitute decision values (``values[var_id]``)."""
        terms = {}
        for e, d in self.terms.items():
            s = 0.0
            for k, c in d.items():
                s += c if k == CONST else c * values[k]
            terms[e] = s
        return Polynomial(terms, self.variables)


@dataclass(frozen=True)
class DecisionPoly:
    """Polynomial template: one free scalar coefficient per basis monomial."""

    variables: tuple[str, ...]
    basis: tuple[tuple[int, ...], ...]
    coeff_ids: tuple[int, ...]

    def affine(self) -> AffinePoly:
        return AffinePoly(self.variables, {e: {i: 1.0} for e, i in zip(self.basis, self.coeff_ids)})

    def value(self, values: np.ndarray) -> Polynomial:
        return Polynomial({e: values[i] for e, i in zip(self.basis, self.coeff_ids)}, self.variables)


@dataclass(frozen=True)
class GramPoly:
    """``z' G z`` for a PSD block ``G`` on the monomial vector ``z``."""

    variables: tuple[str, ...]
    basis: tuple[tuple[int, ...], ...]
    block: int
    base_id: int

    @property
    def size(self) -> int:
        return len(self.basis)

    def entry_id(self, i: int, j: int) -> int:
        if i > j:
            i, j = j, i
        k = self.size
        return self.base_id + i * k - i * (i - 1) // 2 + (j - i)

    def affine(self) -> AffinePoly:
        terms: dict = {}
        k = self.size
        for i in range(k):
            for j in range(i, k):
                e = tuple(a + b for a, b in zip(self.basis[i], self.basis[j]))
                d = terms.setdefault(e, {})
                d[self.entry_id(i, j)] = d.get(self.entry_id(i, j), 0.0) + (1.0 if i == j else 2.0)
        return AffinePoly(self.variables, terms)

    def polynomial(self, G: np.ndarray) -> Polynomial:
        terms: dict = {}
        k = self.size
        for i in range(k):
            for j in range(i, k):
                e = tuple(a + b for a, b in zip(self.basis[i], self.basis[j]))
                terms[e] = terms.get(e, 0.0) + (G[i, j] if i == j else 2.0 * G[i, j])
        return Polynomial(terms, self.variables)


@dataclass
class SosIdentity:
    name: str
    expression: AffinePoly
    gram: GramPoly


def psd_repair(G: np.ndarray) -> np.ndarray:
    """Nearest PSD matrix (negative eigenvalues clipped)."""
    w, V = np.linalg.eigh(0.5 * (G + G.T))
    if w[0] >= 0:
        return 0.5 * (G + G.T)
    return (V * np.maximum(w, 0.0)) @ V.T


def half_basis(variables: Sequence[str], degree: int) -> list[tuple[int, ...]]:
    return monomial_basis(variables, math.ceil(degree / 2))


class SosProgram:
    """Collects decision variables, SOS identities and linear constraints."""

    def __init__(self, variables: Sequence[str], coeff_bound: float = 1000.0):
        self.variables = tuple(variables)
        self.coeff_bound = float(coeff_bound)
        self.n_ids = 0
        self.scalar_ids: list[int] = []
        self.scalar_bounds: list[tuple[float, float]] = []
        self.blocks: list[GramPoly | int] = []   # GramPoly or plain dimension
        self.block_base: list[int] = []
        self.identities: list[SosIdentity] = []
        self.equalities: list[tuple[dict[int, float], float, str]] = []
        self.objective: dict[int, float] = {}

    # variables ---------------------------------------------------------------

    def new_scalar(self, lower: float | None = None, upper: float | None = None) -> int:
        lo = -self.coeff_bound if lower is None else lower
        hi = self.coeff_bound if upper is None else upper
        if not lo < hi:
            raise ValueError("scalar bounds must satisfy lower < upper")
        i = self.n_ids
        self.n_ids += 1
        self.scalar_ids.append(i)
        self.scalar_bounds.append((float(lo), float(hi)))
        return i

    def new_template(self, degree: int, variables: Sequence[str] | None = None,
                     min_degree: int = 0) -> DecisionPoly:
        variables = tuple(variables or self.variables)
        basis = tuple(monomial_basis(variables, degree, min_degree))
        ids = tuple(self.new_scalar() for _ in basis)
        return DecisionPoly(variables, basis, ids)

    def _new_block(self, k: int) -> tuple[int, int]:
        blk = len(self.blocks)
        base = self.n_ids
        self.n_ids += k * (k + 1) // 2
        self.block_base.append(base)
        return blk, base

    def new_sos(self, degree: int) -> GramPoly:
        """Free SOS polynomial of the given (even) degree."""
        basis = tuple(half_basis(self.variables, degree))
        blk, base = self._new_block(len(basis))
        g = GramPoly(self.variables, basis, blk, base)
        self.blocks.append(g)
        return g

    # constraints -------------------------------------------------------------

    def add_sos(self, expression: AffinePoly, name: str = "") -> GramPoly:
        """Require ``expression`` to be a sum of squares; returns its Gram certificate."""
        g = self.new_sos(expression.degree())
        self.identities.append(SosIdentity(name or f"sos{len(self.identities)}", expression, g))
        return g

    def add_equality(self, coeffs: Mapping[int, float], rhs: float, name: str = "") -> None:
        self.equalities.append((dict(coeffs), float(rhs), name))

    def add_psd_affine(self, entries: Sequence[Sequence[Mapping[int, float]]], name: str = "") -> int:
        """New PSD block whose (i, j) entry equals the affine form ``entries[i][j]``.

        Affine forms use ``CONST`` for the constant.  Returns the block index.
        """
        k = len(entries)
        blk, base = self._new_block(k)
        self.blocks.append(k)
        for i in range(k):
            for j in range(i, k):
                form = dict(entries[i][j])
                const = form.pop(CONST, 0.0)
                row = {base + i * k - i * (i - 1) // 2 + (j - i): 1.0}
                _add_into(row, form, -1.0)
                self.add_equality(row, const, f"{name}[{i},{j}]")
        return blk

    def block_entry_id(self, blk: int, i: int, j: int) -> int:
        k = self.block_size(blk)
        if i > j:
            i, j = j, i
        return self.block_base[blk] + i * k - i * (i - 1) // 2 + (j - i)

    def block_size(self, blk: int) -> int:
        b = self.blocks[blk]
        return b.size if isinstance(b, GramPoly) else b

    def maximize(self, weights: Mapping[int, float]) -> None:
        self.objective = dict(weights)

    def set_objective_integral(self, template: DecisionPoly, moments: Mapping[tuple[int, ...], float]) -> None:
        """Maximise the integral of ``template``, given the monomial moments of the region."""
        self.maximize({i: moments[e] for e, i in zip(template.basis, template.coeff_ids)})

    # compilation -------------------------------------------------------------

    def compile(self) -> SdpProblem:
        """Block-diagonal SDP in the solver's standard form (minimisation).

        Each bounded scalar ``c in [L, U]`` becomes ``c = L + t`` with slacks
        ``t, t' >= 0`` and ``t + t' = U - L``.
        """
        nsc = len(self.scalar_ids)
        scalar_pos = {sid: k for k, sid in enumerate(self.scalar_ids)}
        lower = np.array([b[0] for b in self.scalar_bounds])
        upper = np.array([b[1] for b in self.scalar_bounds])
        entry_loc: dict[int, tuple[int, int, int]] = {}
        for blk in range(len(self.blocks)):
            k = self.block_size(blk)
            base = self.block_base[blk]
            for i in range(k):
                for j in range(i, k):
                    entry_loc[base + i * k - i * (i - 1) // 2 + (j - i)] = (blk, i, j)

        lp_r, lp_c, lp_v = [], [], []
        ps = [([], [], [], []) for _ in self.blocks]
        b: list[float] = []
        labels: list[str] = []

        def emit(coeffs: Mapping[int, float], rhs: float, label: str):
            r = len(b)
            for vid, c in coeffs.items():
                if c == 0:
                    continue
                if vid in scalar_pos:
                    k = scalar_pos[vid]
                    lp_r.append(r); lp_c.append(2 * k); lp_v.append(c)
                    rhs -= c * lower[k]
                else:
                    blk, i, j = entry_loc[vid]
                    rows, ii, jj, vv = ps[blk]
                    rows.append(r); ii.append(i); jj.append(j); vv.append(c)
            b.append(rhs)
            labels.append(label)

        for ident in self.identities:
            rhs_gram = ident.gram.affine()
            mons = sorted(set(ident.expression.terms) | set(rhs_gram.terms),
                          key=lambda e: (sum(e), tuple(-a for a in e)))
            for e in mons:
                row: dict[int, float] = {}
                _add_into(row, ident.expression.terms.get(e, {}))
                _add_into(row, rhs_gram.terms.get(e, {}), -1.0)
                const = row.pop(CONST, 0.0)
                emit(row, -const, f"{ident.name}:{e}")
        for coeffs, rhs, name in self.equalities:
            emit(coeffs, rhs, name)
        for k in range(nsc):
            r = len(b)
            lp_r += [r, r]; lp_c += [2 * k, 2 * k + 1]; lp_v += [1.0, 1.0]
            b.append(upper[k] - lower[k])
            labels.append(f"box:{self.scalar_ids[k]}")

        m = len(b)
        c_lp = np.zeros(2 * nsc)
        C_psd = [([], [], []) for _ in self.blocks]
        for vid, w in self.objective.items():
            if vid in scalar_pos:
                c_lp[2 * scalar_pos[vid]] -= w
            else:
                blk, i, j = entry_loc[vid]
                C_psd[blk][0].append(i); C_psd[blk][1].append(j); C_psd[blk][2].append(-w)
        A_lp = sp.csr_matrix((lp_v, (lp_r, lp_c)), shape=(m, 2 * nsc))
        prob = SdpProblem(
            b=np.array(b), blocks=[self.block_size(k) for k in range(len(self.blocks))],
            A_psd=[tuple(np.array(a, dtype=float if t == 3 else int) for t, a in enumerate(x)) for x in ps],
            C_psd=[tuple(np.array(a, dtype=float if t == 2 else int) for t, a in enumerate(x)) for x in C_psd],
            n_lp=2 * nsc, A_lp=A_lp, c_lp=c_lp,
            labels={"rows": labels},
        )
        prob.labels["objective_offset"] = float(sum(w * lower[scalar_pos[v]]
                                                     for v, w in self.objective.items() if v in scalar_pos))
        return prob

    # recovery ----------------------------------------------------------------

    def extract(self, sol: SdpSolution, check: bool = True, rel_tol: float = 1e-6) -> "ProgramValues":
        if sol.status not in ("optimal", "feasible", "inaccurate"):
            raise ResidualError(f"no solution to extract (status {sol.status})")
        values = np.zeros(self.n_ids)
        for k, sid in enumerate(self.scalar_ids):
            values[sid] = self.scalar_bounds[k][0] + sol.x_lp[2 * k]
        grams = [0.5 * (X + X.T) for X in sol.X]
        for blk, G in enumerate(grams):
            k = len(G)
            iu = np.triu_indices(k)
            base = self.block_base[blk]
            values[base:base + k * (k + 1) // 2] = G[iu]
        pv = ProgramValues(self, values, grams, sol)
        if check:
            for ident in self.identities:
                err, scale = pv.identity_error(ident)
                # decision variables live in [-coeff_bound, coeff_bound]; the shift
                # applied downstream absorbs whatever error remains
                if err > rel_tol * max(1.0, scale, self.coeff_bound):
                    raise ResidualError(f"identity {ident.name} violated by {err:.3e} (scale {scale:.3e})")
        return pv


@dataclass
class ProgramValues:
    program: SosProgram
    values: np.ndarray
    grams: list[np.ndarray]
    solution: SdpSolution
    _repaired: dict = field(default_factory=dict)

    def scalar(self, vid: int) -> float:
        return float(self.values[vid])

    def poly(self, obj) -> Polynomial:
        if isinstance(obj, GramPoly):
            return obj.polynomial(self.grams[obj.block])
        return obj.value(self.values)

    def repaired_gram(self, blk: int) -> np.ndarray:
        if blk not in self._repaired:
            self._repaired[blk] = psd_repair(self.grams[blk])
        return self._repaired[blk]

    def repaired_values(self) -> np.ndarray:
        """Decision values with every Gram block projected onto the PSD cone."""
        vals = self.values.copy()
        for blk in range(len(self.grams)):
            G = self.repaired_gram(blk)
            k = len(G)
            base = self.program.block_base[blk]
            vals[base:base + k * (k + 1) // 2] = G[np.triu_indices(k)]
        return vals

    def sos_poly(self, g: GramPoly, repaired: bool = True) -> Polynomial:
        G = self.repaired_gram(g.block) if repaired else self.grams[g.block]
        return g.polynomial(G)

    def identity_error(self, ident: SosIdentity) -> tuple[float, float]:
        lhs = ident.expression.value(self.values)
        rhs = ident.gram.polynomial(self.grams[ident.gram.block])
        diff = lhs - rhs
        err = max((abs(c) for c in diff.terms.values()), default=0.0)
        scale = max((abs(c) for c in lhs.terms.values()), default=0.0)
        scale = max(scale, float(np.max(np.abs(self.grams[ident.gram.block]), initial=0.0)))
        return err, scale

    def repaired_residual(self, ident: SosIdentity) -> Polynomial:
        """``expression - z'G+z`` with every Gram block (multipliers included) made PSD.

        The expression therefore equals an exact SOS plus this residual.
        """
        vals = self.repaired_values()
        lhs = ident.expression.value(vals)
        return lhs - ident.gram.polynomial(self.repaired_gram(ident.gram.block))


@dataclass
class Certificate:
    kind: str
    v: Polynomial
    lam: float
    multipliers: dict[str, Polynomial] = field(default_factory=dict)
    status: str = "optimal"
    solver_iters: int = 0
    objective_value: float | None = None
    gamma: float | None = None
    shift: float = 0.0
    controller: tuple[Polynomial, ...] | None = None
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        from .specio import certificate_to_dict
        return certificate_to_dict(self)
