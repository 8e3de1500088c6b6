"""Sublevel sets and boxes: bounding boxes, the one-step enclosure, moments, sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .polycore import Polynomial, interval_range


class ThinSetError(RuntimeError):
    """Rejection sampling found (almost) no points in the set."""


class UnsupportedSetError(ValueError):
    """No closed-form moment for this set shape."""


@dataclass(frozen=True)
class BoxSet:
    lower: np.ndarray
    upper: np.ndarray
    variables: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float))
        object.__setattr__(self, "variables", tuple(self.variables))
        if self.lower.shape != self.upper.shape or self.lower.shape != (len(self.variables),):
            raise ValueError("box bounds must have one entry per variable")
        if not np.all(self.lower < self.upper):
            raise ValueError("box needs lower < upper componentwise")

    @property
    def box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.lower, self.upper

    @property
    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    def as_dict(self) -> dict[str, tuple[float, float]]:
        return {v: (float(a), float(b)) for v, a, b in zip(self.variables, self.lower, self.upper)}

    def contains(self, pts: np.ndarray) -> np.ndarray:
        return np.all((pts >= self.lower) & (pts <= self.upper), axis=1)


@dataclass(frozen=True)
class SublevelSet:
    """Intersection of ``{p < 0}`` (strict) or ``{p <= 0}`` over ``defining``."""

    defining: tuple[Polynomial, ...]
    variables: tuple[str, ...]
    strict: bool = True
    box: tuple[np.ndarray, np.ndarray] | None = None

    @classmethod
    def build(cls, defining, variables, strict=True, hint=None) -> "SublevelSet":
        if isinstance(defining, Polynomial):
            defining = (defining,)
        defining = tuple(p.with_variables(variables) for p in defining)
        box = bounding_box(defining, variables)
        if hint is not None:
            box = _intersect(box, hint)
        return cls(defining, tuple(variables), strict, box)

    @property
    def defining_poly(self) -> Polynomial:
        if len(self.defining) != 1:
            raise ValueError("set is an intersection of several inequalities")
        return self.defining[0]

    def contains(self, pts: np.ndarray) -> np.ndarray:
        ok = np.ones(len(pts), dtype=bool)
        for p in self.defining:
            vals = p.evaluate_array(pts, self.variables)
            ok &= (vals < 0) if self.strict else (vals <= 0)
        return ok

    def ball(self) -> tuple[np.ndarray, float] | None:
        """``(center, radius)`` if the set is a single Euclidean ball."""
        if len(self.defining) != 1:
            return None
        return recognize_ball(self.defining[0], self.variables)


def _intersect(a, b):
    if a is None:
        return b
    if b is None:
        return a
    lo = np.maximum(a[0], b[0])
    hi = np.minimum(a[1], b[1])
    return lo, hi


def _quadratic_parts(p: Polynomial, variables: Sequence[str]):
    """Split a separable quadratic into per-variable (a, b) and a constant, or None."""
    p = p.with_variables(variables)
    n = len(variables)
    sq = np.zeros(n)
    lin = np.zeros(n)
    const = 0.0
    for e, c in p.terms.items():
        d = sum(e)
        if d == 0:
            const += c
        elif d == 1:
            lin[e.index(1)] += c
        elif d == 2 and max(e) == 2:
            sq[e.index(2)] += c
        else:
            return None
    return sq, lin, const


def bounding_box(defining: Sequence[Polynomial], variables: Sequence[str]):
    """Enclosing box from the separable convex quadratics among ``defining``.

    Each inequality of the form sum a_i x_i^2 + b_i x_i + c <= 0 with a_i > 0
    pins the variables it involves.  Returns ``None`` if some variable stays
    unbounded.
    """
    n = len(variables)
    lo = np.full(n, -np.inf)
    hi = np.full(n, np.inf)
    for p in defining:
        parts = _quadratic_parts(p, variables)
        if parts is None:
            continue
        sq, lin, const = parts
        used = (sq != 0) | (lin != 0)
        if not used.any() or np.any(sq[used] <= 0):
            continue
        centre = -lin[used] / (2 * sq[used])
        rad2 = -const + float(np.sum(lin[used] ** 2 / (4 * sq[used])))
        if rad2 < 0:
            return np.ones(n), np.zeros(n)  # empty set, empty box
        half = np.sqrt(rad2 / sq[used])
        idx = np.flatnonzero(used)
        lo[idx] = np.maximum(lo[idx], centre - half)
        hi[idx] = np.minimum(hi[idx], centre + half)
    if not np.all(np.isfinite(lo) & np.isfinite(hi)):
        return None
    return lo, hi


def recognize_ball(p: Polynomial, variables: Sequence[str]) -> tuple[np.ndarray, float] | None:
    parts = _quadratic_parts(p, variables)
    if parts is None:
        return None
    sq, lin, const = parts
    if sq[0] <= 0 or not np.allclose(sq, sq[0], rtol=1e-12, atol=0):
        return None
    a = sq[0]
    centre = -lin / (2 * a)
    r2 = (float(np.sum(lin ** 2)) / (4 * a) - const) / a
    if r2 <= 0:
        return None
    return centre, math.sqrt(r2)


# ---------------------------------------------------------------------------
# sets attached to problem specifications


def _hint(spec):
    if spec.state_bounds is None:
        return None
    b = np.array(spec.state_bounds, dtype=float)
    return b[:, 0], b[:, 1]


def safe_set(spec) -> SublevelSet:
    return SublevelSet.build(spec.safe_h, spec.state_vars, True, _hint(spec))


def target_set(spec) -> SublevelSet:
    s = SublevelSet.build(spec.target_g, spec.state_vars, True)
    return SublevelSet(s.defining, s.variables, True, _intersect(s.box, safe_set(spec).box))


def domain_set(spec) -> SublevelSet:
    return SublevelSet.build(spec.domain, spec.state_vars, False, _hint(spec))


def init_set(spec) -> SublevelSet:
    s = SublevelSet.build(spec.init, spec.state_vars, False)
    return SublevelSet(s.defining, s.variables, False, _intersect(s.box, domain_set(spec).box))


def unsafe_set(spec) -> SublevelSet:
    s = SublevelSet.build(spec.unsafe, spec.state_vars, False)
    return SublevelSet(s.defining, s.variables, False, _intersect(s.box, domain_set(spec).box))


def compute_xhat(spec) -> Polynomial:
    """Ball polynomial whose strict sublevel set holds X and every one-step successor.

    Two enclosing radii about the origin are computed and the smaller is kept:
    the corner norm of the union of box(X) and the interval image of f, and
    the largest norm over box(X) plus the corner norm of the interval
    enclosure of the displacement f(x, u) - x.
    """
    X = safe_set(spec)
    if X.box is None:
        raise ValueError("safe set has no bounding box")
    lo, hi = X.box
    env = {v: (float(a), float(b)) for v, a, b in zip(spec.state_vars, lo, hi)}
    env.update(spec.ubox.as_dict())
    img_lo, img_hi = [], []
    disp = []
    for v, fi in zip(spec.state_vars, spec.dynamics):
        a, b = interval_range(fi, env)
        img_lo.append(a)
        img_hi.append(b)
        disp.append(interval_range(fi - Polynomial.var(v), env))
    corner = np.maximum(np.maximum(np.abs(img_lo), np.abs(img_hi)),
                        np.maximum(np.abs(lo), np.abs(hi)))
    r_union = float(np.linalg.norm(corner))
    box_norm = float(np.linalg.norm(np.maximum(np.abs(lo), np.abs(hi))))
    r_disp = box_norm + float(np.linalg.norm([max(abs(a), abs(b)) for a, b in disp]))
    r = min(r_union, r_disp)
    h = Polynomial.const(-r * r, spec.state_vars)
    for v in spec.state_vars:
        h = h + Polynomial.var(v) ** 2
    return h.with_variables(spec.state_vars)


def xhat_set(spec) -> SublevelSet:
    h = spec.xhat_h if spec.xhat_h is not None else compute_xhat(spec)
    return SublevelSet.build(h, spec.state_vars, True)


# ---------------------------------------------------------------------------
# moments


def _interval_moment(a: float, b: float, k: int) -> float:
    return (b ** (k + 1) - a ** (k + 1)) / (k + 1)


def _centered_ball_moment(exponent: Sequence[int], radius: float) -> float:
    if any(k % 2 for k in exponent):
        return 0.0
    n = len(exponent)
    total = sum(exponent)
    log_num = sum(math.lgamma((k + 1) / 2) for k in exponent)
    log_den = math.lgamma((total + n) / 2 + 1)
    return math.exp(log_num - log_den) * radius ** (total + n)


def monomial_moment(region, exponent: Sequence[int]) -> float:
    """Exact integral of ``x^exponent`` over a box or a Euclidean ball."""
    exponent = tuple(int(k) for k in exponent)
    if isinstance(region, BoxSet):
        return float(np.prod([_interval_moment(a, b, k)
                              for a, b, k in zip(region.lower, region.upper, exponent)]))
    ball = region.ball() if isinstance(region, SublevelSet) else None
    if ball is None:
        raise UnsupportedSetError("closed-form moments need a box or a ball")
    centre, r = ball
    if not np.any(centre):
        return _centered_ball_moment(exponent, r)
    # expand prod (y_i + c_i)^k_i around the centre
    total = 0.0
    ranges = [range(k + 1) for k in exponent]
    for js in np.ndindex(*[len(rg) for rg in ranges]):
        if any(j % 2 for j in js):
            continue
        coeff = 1.0
        for k, j, c in zip(exponent, js, centre):
            coeff *= math.comb(k, j) * c ** (k - j)
        if coeff:
            total += coeff * _centered_ball_moment(js, r)
    return total


def set_volume(region) -> float:
    return monomial_moment(region, (0,) * len(region.variables))


# ---------------------------------------------------------------------------
# sampling


def sample_uniform(region, n: int, seed: int | np.random.Generator = 0, *,
                   batch: int = 200_000, max_proposals: int = 10 ** 8,
                   min_rate: float = 1e-6) -> np.ndarray:
    """``n`` points drawn uniformly from ``region`` by rejection from its box."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if region.box is None:
        raise ValueError("set has no bounding box")
    lo, hi = region.box
    if np.any(hi < lo):
        raise ThinSetError("bounding box is empty")
    if isinstance(region, BoxSet):
        return rng.uniform(lo, hi, size=(n, len(lo)))
    ball = region.ball()
    if ball is not None and _ball_inside_box(ball, lo, hi):
        return _sample_ball(rng, ball, n)
    out: list[np.ndarray] = []
    have = 0
    proposed = 0
    while have < n:
        pts = rng.uniform(lo, hi, size=(batch, len(lo)))
        proposed += batch
        keep = pts[region.contains(pts)]
        out.append(keep)
        have += len(keep)
        if proposed >= max_proposals or (proposed >= 10 ** 7 and have < min_rate * proposed):
            if have < min_rate * proposed or have < n:
                raise ThinSetError(f"accepted {have} of {proposed} proposals")
    return np.concatenate(out)[:n]


def _ball_inside_box(ball, lo, hi) -> bool:
    c, r = ball
    return bool(np.all(c - r >= lo - 1e-12) and np.all(c + r <= hi + 1e-12))


def _sample_ball(rng: np.random.Generator, ball, n: int) -> np.ndarray:
    """Uniform points in a Euclidean ball: Gaussian directions, radius ~ U^(1/d)."""
    c, r = ball
    d = len(c)
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    rad = r * rng.random(n) ** (1.0 / d)
    return c + g * rad[:, None]
