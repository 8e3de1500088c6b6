"""Expectations over the control input, eliminating u from v(f(x, u)).

Both the uniform law on the input box and the epsilon-greedy mixture around a
nominal controller are handled exactly with iterated antiderivatives.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .polycore import Polynomial, integrate_var, power_products
from .semisets import BoxSet


@dataclass(frozen=True)
class EpsGreedyParams:
    """Mixture of a uniform law on ``controller(x) +/- delta`` and on the whole box.

    The first component has weight ``1 - epsilon``, the second ``epsilon``;
    both densities are constant so the normaliser is ``Z``.
    """

    epsilon: float
    delta: float
    ubox: BoxSet
    controller: tuple[Polynomial, ...] | None = None
    schedule_factor: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.epsilon == 0.0 and self.delta == 0.0:
            raise ValueError("epsilon and delta cannot both be zero")
        if self.delta < 0:
            raise ValueError("delta must be non-negative")
        if self.delta > 0:
            half = 0.5 * float(np.min(self.ubox.upper - self.ubox.lower))
            if not self.delta < half:
                raise ValueError(f"delta must be below half the narrowest input range ({half})")
        if not 0.0 < self.schedule_factor <= 1.0:
            raise ValueError("schedule factor must lie in (0, 1]")
        if self.controller is not None and len(self.controller) != len(self.ubox.variables):
            raise ValueError("controller needs one component per input")

    @property
    def Z(self) -> float:
        m = len(self.ubox.variables)
        return (1.0 - self.epsilon) * (2.0 * self.delta) ** m + self.epsilon * self.ubox.volume

    def with_epsilon(self, epsilon: float) -> "EpsGreedyParams":
        return EpsGreedyParams(epsilon, self.delta, self.ubox, self.controller, self.schedule_factor)

    def with_controller(self, controller) -> "EpsGreedyParams":
        return EpsGreedyParams(self.epsilon, self.delta, self.ubox, tuple(controller), self.schedule_factor)


def _integrate_box(p: Polynomial, names: Sequence[str], lower, upper, state_vars) -> Polynomial:
    for name, a, b in zip(names, lower, upper):
        p = integrate_var(p, name, float(a), float(b))
    return p.with_variables(state_vars)


def _dynamics_list(f, state_vars):
    if isinstance(f, Mapping):
        return {v: f[v] for v in state_vars}
    return dict(zip(state_vars, f))


def expect_uniform_basis(exponents: Sequence[tuple[int, ...]], state_vars: Sequence[str],
                         f, ubox: BoxSet) -> list[Polynomial]:
    """``E[x^e](f(x, u))`` under u ~ uniform(ubox) for each exponent tuple."""
    state_vars = tuple(state_vars)
    prods = power_products(_dynamics_list(f, state_vars), state_vars, exponents)
    inv = 1.0 / ubox.volume
    return [_integrate_box(prods[tuple(e)], ubox.variables, ubox.lower, ubox.upper, state_vars).scale(inv)
            for e in exponents]


def _greedy_images(f, state_vars, params: EpsGreedyParams, offset_names):
    """Dynamics with u_j replaced by controller_j(x) + delta * t_j."""
    images = {}
    for uname, c, t in zip(params.ubox.variables, params.controller, offset_names):
        images[uname] = c + Polynomial.var(t).scale(params.delta)
    return {v: fi.substitute(images) for v, fi in _dynamics_list(f, state_vars).items()}


def _offset_names(state_vars, ubox) -> list[str]:
    taken = set(state_vars) | set(ubox.variables)
    names, k = [], 0
    while len(names) < len(ubox.variables):
        cand = f"_t{k}"
        if cand not in taken:
            names.append(cand)
        k += 1
    return names


def expect_eps_greedy_basis(exponents: Sequence[tuple[int, ...]], state_vars: Sequence[str],
                            f, params: EpsGreedyParams) -> list[Polynomial]:
    """Mixture expectation of each ``x^e`` composed with the dynamics."""
    if params.controller is None:
        raise ValueError("epsilon-greedy expectation needs a controller")
    state_vars = tuple(state_vars)
    ubox = params.ubox
    m = len(ubox.variables)
    Z = params.Z
    out = [Polynomial.const(0.0, state_vars) for _ in exponents]
    if params.epsilon < 1.0 and params.delta > 0:
        # substituting u = controller + delta*t gives du = delta^m dt over [-1, 1]^m
        ts = _offset_names(state_vars, ubox)
        prods = power_products(_greedy_images(f, state_vars, params, ts), state_vars, exponents)
        w = (1.0 - params.epsilon) * params.delta ** m / Z
        for i, e in enumerate(exponents):
            part = _integrate_box(prods[tuple(e)], ts, [-1.0] * m, [1.0] * m, state_vars)
            out[i] = out[i] + part.scale(w)
    if params.epsilon > 0:
        uni = expect_uniform_basis(exponents, state_vars, f, ubox)
        w = params.epsilon * ubox.volume / Z
        out = [o + q.scale(w) for o, q in zip(out, uni)]
    return out


def greedy_basis(exponents: Sequence[tuple[int, ...]], state_vars: Sequence[str], f,
                 controller: Sequence[Polynomial], input_vars: Sequence[str]) -> list[Polynomial]:
    """``x^e`` evaluated at ``f(x, controller(x))`` (the deterministic limit)."""
    state_vars = tuple(state_vars)
    sub = dict(zip(input_vars, controller))
    images = {v: fi.substitute(sub) for v, fi in _dynamics_list(f, state_vars).items()}
    prods = power_products(images, state_vars, exponents)
    return [prods[tuple(e)].with_variables(state_vars) for e in exponents]


def _combine(v: Polynomial, state_vars, basis_fn) -> Polynomial:
    v = v.with_variables(state_vars)
    exps = list(v.terms)
    if not exps:
        return Polynomial.const(0.0, state_vars)
    parts = basis_fn(exps)
    total = Polynomial.const(0.0, state_vars)
    for e, q in zip(exps, parts):
        total = total + q.scale(v.terms[e])
    return total


def expect_uniform(v: Polynomial, f, ubox: BoxSet, state_vars: Sequence[str]) -> Polynomial:
    """``(1/vol U) * integral over U of v(f(x, u)) du``, a polynomial in x."""
    state_vars = tuple(state_vars)
    return _combine(v, state_vars, lambda exps: expect_uniform_basis(exps, state_vars, f, ubox))


def expect_eps_greedy(v: Polynomial, f, params: EpsGreedyParams, state_vars: Sequence[str]) -> Polynomial:
    state_vars = tuple(state_vars)
    return _combine(v, state_vars, lambda exps: expect_eps_greedy_basis(exps, state_vars, f, params))


def greedy_successor(v: Polynomial, f, controller, state_vars, input_vars) -> Polynomial:
    state_vars = tuple(state_vars)
    return _combine(v, state_vars, lambda exps: greedy_basis(exps, state_vars, f, controller, input_vars))
