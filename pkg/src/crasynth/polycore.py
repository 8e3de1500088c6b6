"""Sparse multivariate polynomials over named variables.

Terms are stored as a dict from exponent tuples (aligned with ``variables``)
to float coefficients.  Values are treated as immutable: every operation
returns a new polynomial.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

# Terms whose magnitude falls below this after arithmetic are dropped.
DROP_TOL = 1e-14

Number = Union[int, float]


@dataclass(frozen=True)
class Monomial:
    """A power product, stored as sorted ``(name, power)`` pairs with no zero powers."""

    powers: tuple[tuple[str, int], ...] = ()

    @classmethod
    def of(cls, exponents: Mapping[str, int] | None = None, **kw: int) -> "Monomial":
        items = dict(exponents or {}, **kw)
        for name, p in items.items():
            if int(p) != p or p < 0:
                raise ValueError(f"exponent of {name} must be a non-negative integer, got {p}")
        return cls(tuple(sorted((k, int(p)) for k, p in items.items() if p)))

    @property
    def degree(self) -> int:
        return sum(p for _, p in self.powers)

    def as_dict(self) -> dict[str, int]:
        return dict(self.powers)

    def __mul__(self, other: "Monomial") -> "Monomial":
        d = self.as_dict()
        for k, p in other.powers:
            d[k] = d.get(k, 0) + p
        return Monomial.of(d)

    def __str__(self) -> str:
        if not self.powers:
            return "1"
        return "*".join(k if p == 1 else f"{k}^{p}" for k, p in self.powers)


def _clean(terms: dict) -> dict:
    return {e: c for e, c in terms.items() if abs(c) >= DROP_TOL}


class Polynomial:
    """Real polynomial in named variables.

    >>> x = Polynomial.var("x")
    >>> str((x + 1) * (x - 1))
    '1.0*x^2 + -1.0'
    """

    __slots__ = ("variables", "terms")

    def __init__(self, terms: Mapping[tuple[int, ...], float] | None = None,
                 variables: Sequence[str] = ()):
        variables = tuple(variables)
        if len(set(variables)) != len(variables):
            raise ValueError(f"duplicate variable names in {variables}")
        clean = {}
        for e, c in (terms or {}).items():
            e = tuple(int(k) for k in e)
            if len(e) != len(variables):
                raise ValueError("exponent tuple does not match variables")
            c = float(c)
            if abs(c) >= DROP_TOL:
                clean[e] = clean.get(e, 0.0) + c
        self.variables = variables
        self.terms = _clean(clean)

    # construction ---------------------------------------------------------

    @classmethod
    def _raw(cls, terms: dict, variables: tuple[str, ...]) -> "Polynomial":
        p = cls.__new__(cls)
        p.variables = variables
        p.terms = terms
        return p

    @classmethod
    def const(cls, c: Number, variables: Sequence[str] = ()) -> "Polynomial":
        variables = tuple(variables)
        return cls({(0,) * len(variables): c}, variables)

    @classmethod
    def var(cls, name: str) -> "Polynomial":
        return cls({(1,): 1.0}, (name,))

    @classmethod
    def from_monomials(cls, items: Mapping[Monomial, float],
                       variables: Sequence[str] | None = None) -> "Polynomial":
        names = list(variables or [])
        for m in items:
            for k, _ in m.powers:
                if k not in names:
                    names.append(k)
        index = {k: i for i, k in enumerate(names)}
        terms: dict[tuple[int, ...], float] = {}
        for m, c in items.items():
            e = [0] * len(names)
            for k, p in m.powers:
                e[index[k]] = p
            key = tuple(e)
            terms[key] = terms.get(key, 0.0) + float(c)
        return cls(terms, names)

    @classmethod
    def monomial(cls, exponents: Sequence[int], variables: Sequence[str],
                 coeff: float = 1.0) -> "Polynomial":
        return cls({tuple(exponents): coeff}, variables)

    # structure --------------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        """Total degree; the zero polynomial has degree -1."""
        return max((sum(e) for e in self.terms), default=-1)

    def degree_in(self, name: str) -> int:
        if name not in self.variables:
            return 0
        i = self.variables.index(name)
        return max((e[i] for e in self.terms), default=0)

    def used_variables(self) -> tuple[str, ...]:
        return tuple(v for i, v in enumerate(self.variables)
                     if any(e[i] for e in self.terms))

    def monomials(self) -> dict[Monomial, float]:
        out = {}
        for e, c in self.terms.items():
            out[Monomial(tuple(sorted((v, p) for v, p in zip(self.variables, e) if p)))] = c
        return out

    def coefficient(self, m: Monomial | Mapping[str, int]) -> float:
        if not isinstance(m, Monomial):
            m = Monomial.of(m)
        return self.monomials().get(m, 0.0)

    def constant_term(self) -> float:
        return self.terms.get((0,) * len(self.variables), 0.0)

    def with_variables(self, variables: Sequence[str]) -> "Polynomial":
        """Re-express over ``variables``, which must include every used variable."""
        variables = tuple(variables)
        if variables == self.variables:
            return self
        missing = set(self.used_variables()) - set(variables)
        if missing:
            raise ValueError(f"variables {sorted(missing)} not in target ordering")
        pos = [variables.index(v) if v in variables else -1 for v in self.variables]
        terms = {}
        n = len(variables)
        for e, c in self.terms.items():
            new = [0] * n
            for i, p in enumerate(e):
                if p:
                    new[pos[i]] = p
            terms[tuple(new)] = c
        return Polynomial._raw(terms, variables)

    def _aligned(self, other: "Polynomial") -> tuple["Polynomial", "Polynomial"]:
        if self.variables == other.variables:
            return self, other
        names = self.variables + tuple(v for v in other.variables if v not in self.variables)
        return self.with_variables(names), other.with_variables(names)

    # arithmetic -------------------------------------------------------------

    @staticmethod
    def _lift(x) -> "Polynomial":
        if isinstance(x, Polynomial):
            return x
        if isinstance(x, (int, float, np.floating, np.integer)):
            return Polynomial.const(float(x))
        return NotImplemented

    def __add__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        a, b = self._aligned(other)
        terms = dict(a.terms)
        for e, c in b.terms.items():
            terms[e] = terms.get(e, 0.0) + c
        return Polynomial._raw(_clean(terms), a.variables)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial._raw({e: -c for e, c in self.terms.items()}, self.variables)

    def __sub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, s: float) -> "Polynomial":
        s = float(s)
        if s == 0.0:
            return Polynomial._raw({}, self.variables)
        return Polynomial._raw(_clean({e: c * s for e, c in self.terms.items()}), self.variables)

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self.scale(other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        a, b = self._aligned(other)
        if len(a.terms) < len(b.terms):
            a, b = b, a
        terms: dict[tuple[int, ...], float] = {}
        get = terms.get
        bt = list(b.terms.items())
        n = len(a.variables)
        if n == 1:
            for (e1,), c1 in a.terms.items():
                for (e2,), c2 in bt:
                    k = (e1 + e2,)
                    terms[k] = get(k, 0.0) + c1 * c2
        else:
            for e1, c1 in a.terms.items():
                for e2, c2 in bt:
                    k = tuple([i + j for i, j in zip(e1, e2)])
                    terms[k] = get(k, 0.0) + c1 * c2
        return Polynomial._raw(_clean(terms), a.variables)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self.scale(1.0 / float(other))
        return NotImplemented

    def __pow__(self, k: int) -> "Polynomial":
        if int(k) != k or k < 0:
            raise ValueError("polynomial powers must be non-negative integers")
        result = Polynomial.const(1.0, self.variables)
        base = self
        k = int(k)
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    # comparison -------------------------------------------------------------

    def __eq__(self, other) -> bool:
        other = self._lift(other)
        if other is NotImplemented:
            return False
        return self.monomials() == other.monomials()

    def __hash__(self):
        return hash(frozenset(self.monomials().items()))

    def allclose(self, other: "Polynomial", atol: float = 1e-12, rtol: float = 1e-12) -> bool:
        diff = self - other
        scale = max([abs(c) for c in self.terms.values()] + [abs(c) for c in other.terms.values()] + [1.0])
        return all(abs(c) <= atol + rtol * scale for c in diff.terms.values())

    # evaluation -------------------------------------------------------------

    def evaluate(self, point: Mapping[str, float]) -> float:
        """Evaluate at a point given as a name -> value mapping (naive term sum)."""
        used = self.used_variables()
        missing = [v for v in used if v not in point]
        if missing:
            raise KeyError(f"no value assigned to {missing}")
        vals = [float(point[v]) if v in point else 0.0 for v in self.variables]
        total = 0.0
        for e, c in self.terms.items():
            t = c
            for x, p in zip(vals, e):
                if p:
                    t *= x ** p
            total += t
        return total

    __call__ = evaluate

    def evaluate_array(self, points: np.ndarray, variables: Sequence[str],
                       chunk: int = 65536) -> np.ndarray:
        """Vectorised evaluation; ``points`` has one column per name in ``variables``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        variables = tuple(variables)
        if pts.shape[1] != len(variables):
            raise ValueError("points must have one column per variable")
        missing = [v for v in self.used_variables() if v not in variables]
        if missing:
            raise KeyError(f"no value assigned to {missing}")
        if not self.terms:
            return np.zeros(len(pts))
        used = self.used_variables()
        p = self.with_variables(used)
        cols = [variables.index(v) for v in used]
        E = np.array(list(p.terms.keys()), dtype=np.int64).reshape(len(p.terms), len(used))
        c = np.array(list(p.terms.values()))
        out = np.empty(len(pts))
        for start in range(0, len(pts), chunk):
            block = pts[start:start + chunk]
            M = np.ones((len(block), len(c)))
            for j, col in enumerate(cols):
                dmax = int(E[:, j].max())
                if dmax == 0:
                    continue
                powers = block[:, col:col + 1] ** np.arange(dmax + 1)
                M *= powers[:, E[:, j]]
            out[start:start + chunk] = M @ c
        return out

    # calculus / substitution ---------------------------------------------------

    def substitute(self, images: Mapping[str, "Polynomial | float"]) -> "Polynomial":
        """Replace variables by polynomials; unmapped variables are kept as-is."""
        images = {k: self._lift(v) for k, v in images.items() if k in self.variables}
        if not images:
            return self
        keep = [v for v in self.variables if v not in images]
        subst = {v: images.get(v, Polynomial.var(v)) for v in self.variables}
        prods = power_products(subst, self.variables, self.terms.keys())
        acc: dict = {}
        allnames = list(keep)
        for q in prods.values():
            for v in q.variables:
                if v not in allnames:
                    allnames.append(v)
        allnames_t = tuple(allnames)
        for e, c in self.terms.items():
            q = prods[e].with_variables(allnames_t)
            for k, v in q.terms.items():
                acc[k] = acc.get(k, 0.0) + c * v
        return Polynomial._raw(_clean(acc), allnames_t)

    def integrate(self, name: str, lower: "Polynomial | float",
                  upper: "Polynomial | float") -> "Polynomial":
        return integrate_var(self, name, lower, upper)

    # rendering ----------------------------------------------------------------

    def sorted_terms(self) -> list[tuple[tuple[int, ...], float]]:
        """Terms in descending graded-lexicographic order."""
        return sorted(self.terms.items(), key=lambda t: (-sum(t[0]), tuple(-k for k in t[0])))

    def render(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for e, c in self.sorted_terms():
            factors = [repr(float(c))]
            for v, p in zip(self.variables, e):
                if p == 1:
                    factors.append(v)
                elif p > 1:
                    factors.append(f"{v}^{p}")
            parts.append("*".join(factors))
        return " + ".join(parts)

    def __str__(self) -> str:
        return self.render()

    def __repr__(self) -> str:
        return f"Polynomial({self.render()!r})"


def as_polynomial(x) -> Polynomial:
    p = Polynomial._lift(x)
    if p is NotImplemented:
        raise TypeError(f"cannot convert {type(x).__name__} to Polynomial")
    return p


def add(p: Polynomial, q: Polynomial) -> Polynomial:
    return as_polynomial(p) + as_polynomial(q)


def mul(p: Polynomial, q: Polynomial) -> Polynomial:
    return as_polynomial(p) * as_polynomial(q)


def evaluate(p: Polynomial, point: Mapping[str, float]) -> float:
    return p.evaluate(point)


def power_products(images: Mapping[str, Polynomial], variables: Sequence[str],
                   exponents: Iterable[tuple[int, ...]]) -> dict[tuple[int, ...], Polynomial]:
    """Return ``{e: prod_i images[variables[i]] ** e[i]}`` for every requested ``e``.

    Products are memoised along a downward chain, so a full monomial basis of
    degree ``d`` costs one polynomial multiplication per basis element.
    """
    variables = tuple(variables)
    imgs = [as_polynomial(images[v]) for v in variables]
    one = Polynomial.const(1.0)
    memo: dict[tuple[int, ...], Polynomial] = {(0,) * len(variables): one}

    def get(e: tuple[int, ...]) -> Polynomial:
        stack = [e]
        while stack:
            cur = stack[-1]
            if cur in memo:
                stack.pop()
                continue
            i = next(k for k, p in enumerate(cur) if p)
            prev = cur[:i] + (cur[i] - 1,) + cur[i + 1:]
            if prev in memo:
                memo[cur] = memo[prev] * imgs[i]
                stack.pop()
            else:
                stack.append(prev)
        return memo[e]

    return {tuple(e): get(tuple(e)) for e in exponents}


def compose(p: Polynomial, substitution: Mapping[str, "Polynomial | float"]) -> Polynomial:
    """Substitute every variable of ``p``; a variable without an image is an error."""
    missing = [v for v in p.used_variables() if v not in substitution]
    if missing:
        raise KeyError(f"no substitution given for {missing}")
    return p.substitute(substitution)


def integrate_var(p: Polynomial, name: str, lower: "Polynomial | float",
                  upper: "Polynomial | float") -> Polynomial:
    """Definite integral of ``p`` in ``name`` between polynomial bounds.

    The antiderivative in ``name`` is evaluated at ``upper`` and ``lower`` and
    subtracted; the bounds must not depend on ``name``.
    """
    lower = as_polynomial(lower)
    upper = as_polynomial(upper)
    for bound in (lower, upper):
        if name in bound.used_variables():
            raise ValueError(f"integration bound depends on the integration variable {name}")
    if name not in p.variables:
        return p * (upper - lower)
    i = p.variables.index(name)
    rest = p.variables[:i] + p.variables[i + 1:]
    by_power: dict[int, dict] = {}
    for e, c in p.terms.items():
        slot = by_power.setdefault(e[i], {})
        key = e[:i] + e[i + 1:]
        slot[key] = slot.get(key, 0.0) + c

    const_bounds = not lower.used_variables() and not upper.used_variables()
    if const_bounds:
        a, b = lower.constant_term(), upper.constant_term()
        acc: dict = {}
        for k, terms in by_power.items():
            w = (b ** (k + 1) - a ** (k + 1)) / (k + 1)
            for key, c in terms.items():
                acc[key] = acc.get(key, 0.0) + c * w
        return Polynomial._raw(_clean(acc), rest)

    kmax = max(by_power)
    up, lo = [upper], [lower]
    for _ in range(kmax):
        up.append(up[-1] * upper)
        lo.append(lo[-1] * lower)
    result = Polynomial.const(0.0, rest)
    for k, terms in sorted(by_power.items()):
        weight = (up[k] - lo[k]).scale(1.0 / (k + 1))
        result = result + Polynomial._raw(_clean(terms), rest) * weight
    return result


def monomial_basis(variables: Sequence[str], degree: int,
                   min_degree: int = 0) -> list[tuple[int, ...]]:
    """All exponent tuples with total degree in ``[min_degree, degree]``, graded order."""
    n = len(variables)
    out: list[tuple[int, ...]] = []

    def rec(prefix: list[int], remaining: int, k: int):
        if k == n - 1:
            out.append(tuple(prefix + [remaining]))
            return
        for p in range(remaining, -1, -1):
            rec(prefix + [p], remaining - p, k + 1)

    for d in range(min_degree, degree + 1):
        if n == 0:
            if d == 0:
                out.append(())
            continue
        rec([], d, 0)
    return out


def interval_range(p: Polynomial, box: Mapping[str, tuple[float, float]]) -> tuple[float, float]:
    """Sound enclosure of ``p`` over an axis-aligned box by termwise interval arithmetic."""
    lo_total = hi_total = 0.0
    for e, c in p.terms.items():
        lo, hi = 1.0, 1.0
        for v, k in zip(p.variables, e):
            if not k:
                continue
            a, b = box[v]
            lo, hi = _interval_mul((lo, hi), _interval_pow((a, b), k))
        if c >= 0:
            lo_total += c * lo
            hi_total += c * hi
        else:
            lo_total += c * hi
            hi_total += c * lo
    # absorb rounding of the float accumulation
    slack = 1e-12 * (abs(lo_total) + abs(hi_total) + 1.0)
    return lo_total - slack, hi_total + slack


def _interval_pow(iv: tuple[float, float], k: int) -> tuple[float, float]:
    a, b = iv
    if k % 2 == 1 or a >= 0:
        return (a ** k, b ** k) if a <= b else (b ** k, a ** k)
    if b <= 0:
        return (b ** k, a ** k)
    return (0.0, max(a ** k, b ** k))


def _interval_mul(x: tuple[float, float], y: tuple[float, float]) -> tuple[float, float]:
    prods = (x[0] * y[0], x[0] * y[1], x[1] * y[0], x[1] * y[1])
    return min(prods), max(prods)
