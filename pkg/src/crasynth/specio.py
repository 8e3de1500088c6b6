"""Problem files, the polynomial expression parser, and JSON serialisation."""

from __future__ import annotations

import ast
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .polycore import Polynomial

TSUBSET_SAMPLES = 10_000


class PolynomialSyntaxError(ValueError):
    def __init__(self, message: str, position: int | None = None):
        self.position = position
        where = f" at position {position}" if position is not None else ""
        super().__init__(f"{message}{where}")


class SpecError(ValueError):
    """Invalid problem file; ``field`` names the offending entry."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


# ---------------------------------------------------------------------------
# expression parser


def parse_polynomial(text: str, allowed_vars: Iterable[str]) -> Polynomial:
    """Parse ``+ - * ^`` expressions over real literals and ``allowed_vars``.

    Division is accepted only by a constant sub-expression.
    """
    allowed = tuple(allowed_vars)
    if "**" in text:
        raise PolynomialSyntaxError("use '^' for powers", text.index("**"))
    src = text.replace("^", "**")
    try:
        tree = ast.parse(src.strip() or "0", mode="eval")
    except SyntaxError as exc:
        pos = exc.offset - 1 if exc.offset else None
        if pos is not None:
            # map back through the '^' -> '**' widening
            pos = _unwiden(text, pos)
        raise PolynomialSyntaxError(f"syntax error ({exc.msg})", pos) from None
    return _build(tree.body, text, allowed).with_variables(
        tuple(v for v in allowed))


def _unwiden(text: str, pos: int) -> int:
    shift = 0
    j = 0
    for i, ch in enumerate(text):
        if j >= pos:
            return i
        j += 2 if ch == "^" else 1
    return len(text)


def _build(node: ast.AST, text: str, allowed: tuple[str, ...]) -> Polynomial:
    col = getattr(node, "col_offset", None)
    pos = _unwiden(text, col) if col is not None else None
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise PolynomialSyntaxError(f"unsupported literal {node.value!r}", pos)
        return Polynomial.const(float(node.value))
    if isinstance(node, ast.Name):
        if node.id not in allowed:
            raise PolynomialSyntaxError(f"unknown variable {node.id!r}", pos)
        return Polynomial.var(node.id)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = _build(node.operand, text, allowed)
        return -inner if isinstance(node.op, ast.USub) else inner
    if isinstance(node, ast.BinOp):
        left = _build(node.left, text, allowed)
        if isinstance(node.op, ast.Pow):
            exp = _build(node.right, text, allowed)
            if exp.used_variables():
                raise PolynomialSyntaxError("exponent must be a constant", pos)
            k = exp.constant_term()
            if k != int(k) or k < 0:
                raise PolynomialSyntaxError(f"exponent must be a non-negative integer, got {k}", pos)
            return left ** int(k)
        right = _build(node.right, text, allowed)
        if isinstance(node.op, ast.Add):
            return left + right
        if isinstance(node.op, ast.Sub):
            return left - right
        if isinstance(node.op, ast.Mult):
            return left * right
        if isinstance(node.op, ast.Div):
            if right.used_variables():
                raise PolynomialSyntaxError("division only by constants", pos)
            d = right.constant_term()
            if d == 0:
                raise PolynomialSyntaxError("division by zero", pos)
            return left / d
    raise PolynomialSyntaxError(f"unsupported expression {type(node).__name__}", pos)


# ---------------------------------------------------------------------------
# problem specifications


@dataclass(frozen=True)
class SolveConfig:
    deg_v: int = 4
    deg_multipliers: int | None = None
    deg_controller: int = 2
    coeff_bound: float = 1000.0
    objective_mode: str = "closed_form"
    objective_samples: int = 100
    rng_seed: int = 0
    scale: bool = True

    def __post_init__(self):
        if self.deg_v < 2 or self.deg_v % 2:
            raise SpecError("degree of v must be an even integer >= 2", "deg_v")
        if self.deg_multipliers is not None and (self.deg_multipliers < 0 or self.deg_multipliers % 2):
            raise SpecError("multiplier degree must be a non-negative even integer", "deg_multipliers")
        if self.coeff_bound <= 0:
            raise SpecError("coefficient bound must be positive", "coeff_bound")
        if self.objective_mode not in ("closed_form", "sample_sum"):
            raise SpecError("objective mode must be closed_form or sample_sum", "objective_mode")


@dataclass(frozen=True)
class SystemSpec:
    state_vars: tuple[str, ...]
    input_vars: tuple[str, ...]
    dynamics: tuple[Polynomial, ...]
    safe_h: Polynomial
    target_g: Polynomial
    input_lower: tuple[float, ...]
    input_upper: tuple[float, ...]
    lam: float
    xhat_h: Polynomial | None = None
    state_bounds: tuple[tuple[float, float], ...] | None = None
    name: str = ""
    defaults: Mapping[str, Any] = field(default_factory=dict)

    kind = "reach_avoid"

    @property
    def n(self) -> int:
        return len(self.state_vars)

    @property
    def m(self) -> int:
        return len(self.input_vars)

    @property
    def dynamics_map(self) -> dict[str, Polynomial]:
        return dict(zip(self.state_vars, self.dynamics))

    @property
    def ubox(self):
        from .semisets import BoxSet
        return BoxSet(np.array(self.input_lower), np.array(self.input_upper), self.input_vars)


@dataclass(frozen=True)
class SafetySpec:
    state_vars: tuple[str, ...]
    input_vars: tuple[str, ...]
    dynamics: tuple[Polynomial, ...]
    domain: tuple[Polynomial, ...]
    init: tuple[Polynomial, ...]
    unsafe: tuple[Polynomial, ...]
    input_lower: tuple[float, ...]
    input_upper: tuple[float, ...]
    lam: float
    state_bounds: tuple[tuple[float, float], ...] | None = None
    name: str = ""
    defaults: Mapping[str, Any] = field(default_factory=dict)

    kind = "safety"

    @property
    def n(self) -> int:
        return len(self.state_vars)

    @property
    def m(self) -> int:
        return len(self.input_vars)

    @property
    def dynamics_map(self) -> dict[str, Polynomial]:
        return dict(zip(self.state_vars, self.dynamics))

    @property
    def ubox(self):
        from .semisets import BoxSet
        return BoxSet(np.array(self.input_lower), np.array(self.input_upper), self.input_vars)


def _require(doc: Mapping, key: str, kind: type | tuple):
    if key not in doc:
        raise SpecError("missing required field", key)
    val = doc[key]
    if not isinstance(val, kind):
        raise SpecError(f"expected {kind}, got {type(val).__name__}", key)
    return val


def _names(doc: Mapping, key: str) -> tuple[str, ...]:
    names = _require(doc, key, list)
    if not all(isinstance(v, str) and v.isidentifier() for v in names):
        raise SpecError("variable names must be identifiers", key)
    return tuple(names)


def _poly(doc: Mapping, key: str, allowed: Sequence[str]) -> Polynomial:
    text = _require(doc, key, str)
    try:
        return parse_polynomial(text, allowed)
    except PolynomialSyntaxError as exc:
        raise SpecError(str(exc), key) from None


def _poly_list(doc: Mapping, key: str, allowed: Sequence[str]) -> tuple[Polynomial, ...]:
    val = _require(doc, key, (str, list))
    texts = [val] if isinstance(val, str) else val
    if not texts:
        raise SpecError("at least one polynomial required", key)
    out = []
    for i, t in enumerate(texts):
        if not isinstance(t, str):
            raise SpecError("expected an expression string", f"{key}[{i}]")
        try:
            out.append(parse_polynomial(t, allowed))
        except PolynomialSyntaxError as exc:
            raise SpecError(str(exc), f"{key}[{i}]") from None
    return tuple(out)


def _common(doc: Mapping) -> dict:
    state = _names(doc, "state_vars")
    inputs = _names(doc, "input_vars")
    if set(state) & set(inputs):
        raise SpecError("state and input variables overlap", "input_vars")
    dyn_text = _require(doc, "dynamics", list)
    if len(dyn_text) != len(state):
        raise SpecError(f"need {len(state)} components, got {len(dyn_text)}", "dynamics")
    dynamics = []
    for i, t in enumerate(dyn_text):
        if not isinstance(t, str):
            raise SpecError("expected an expression string", f"dynamics[{i}]")
        try:
            dynamics.append(parse_polynomial(t, state + inputs))
        except PolynomialSyntaxError as exc:
            raise SpecError(str(exc), f"dynamics[{i}]") from None
    lo = [float(v) for v in _require(doc, "input_lower", list)]
    hi = [float(v) for v in _require(doc, "input_upper", list)]
    if len(lo) != len(inputs) or len(hi) != len(inputs):
        raise SpecError("input bounds must have one entry per input variable", "input_lower")
    if not all(a < b for a, b in zip(lo, hi)):
        raise SpecError("input_lower must be below input_upper componentwise", "input_upper")
    bounds = None
    if "state_bounds" in doc:
        raw = _require(doc, "state_bounds", list)
        if len(raw) != len(state) or not all(isinstance(r, list) and len(r) == 2 and r[0] < r[1] for r in raw):
            raise SpecError("need one [lo, hi] pair per state variable", "state_bounds")
        bounds = tuple((float(a), float(b)) for a, b in raw)
    lam = _require(doc, "lambda", (int, float))
    return dict(state_vars=state, input_vars=inputs, dynamics=tuple(dynamics),
                input_lower=tuple(lo), input_upper=tuple(hi), lam=float(lam),
                state_bounds=bounds, name=str(doc.get("name", "")),
                defaults=dict(doc.get("solve", {})))


def system_from_dict(doc: Mapping, *, check_samples: int = TSUBSET_SAMPLES, seed: int = 0) -> SystemSpec:
    c = _common(doc)
    state = c["state_vars"]
    if c["lam"] <= 1:
        raise SpecError("lambda must exceed 1", "lambda")
    spec = SystemSpec(safe_h=_poly(doc, "safe_h", state), target_g=_poly(doc, "target_g", state),
                      xhat_h=_poly(doc, "xhat_h", state) if "xhat_h" in doc else None, **c)
    from .semisets import SublevelSet, safe_set

    X = safe_set(spec)
    if X.box is None:
        raise SpecError("cannot bound the safe set; add state_bounds", "safe_h")
    if check_samples:
        rng = np.random.default_rng(seed)
        # T's own box, not its intersection with X's box: that would hide points outside X
        own = SublevelSet.build(spec.target_g, state, True).box
        box = own if own is not None and np.all(own[0] <= own[1]) else X.box
        pts = rng.uniform(box[0], box[1], size=(check_samples, len(state)))
        inside_t = spec.target_g.evaluate_array(pts, state) < 0
        outside_x = spec.safe_h.evaluate_array(pts, state) >= 0
        bad = np.flatnonzero(inside_t & outside_x)
        if bad.size:
            w = dict(zip(state, pts[bad[0]].tolist()))
            raise SpecError(f"target set is not contained in the safe set; witness {w}", "target_g")
    return spec


def safety_from_dict(doc: Mapping, *, check_samples: int = TSUBSET_SAMPLES, seed: int = 0) -> SafetySpec:
    c = _common(doc)
    state = c["state_vars"]
    if not 0 < c["lam"] < 1:
        raise SpecError("lambda must lie in (0, 1)", "lambda")
    spec = SafetySpec(domain=_poly_list(doc, "domain_h", state), init=_poly_list(doc, "init_hI", state),
                      unsafe=_poly_list(doc, "unsafe_hU", state), **c)
    from .semisets import SublevelSet, domain_set

    D = domain_set(spec)
    if D.box is None:
        raise SpecError("cannot bound the domain; add state_bounds", "domain_h")
    if check_samples:
        rng = np.random.default_rng(seed)
        own = SublevelSet.build(spec.init, state, False).box
        box = own if own is not None and np.all(own[0] <= own[1]) else D.box
        pts = rng.uniform(box[0], box[1], size=(check_samples, len(state)))
        in_i = np.all([p.evaluate_array(pts, state) <= 0 for p in spec.init], axis=0)
        in_u = np.all([p.evaluate_array(pts, state) <= 0 for p in spec.unsafe], axis=0)
        bad = np.flatnonzero(in_i & in_u)
        if bad.size:
            w = dict(zip(state, pts[bad[0]].tolist()))
            raise SpecError(f"initial and unsafe sets overlap; witness {w}", "unsafe_hU")
    return spec


def load_system(path: str | Path, **kw) -> SystemSpec:
    return system_from_dict(_read_json(path), **kw)


def load_safety(path: str | Path, **kw) -> SafetySpec:
    return safety_from_dict(_read_json(path), **kw)


def load_spec(path: str | Path, **kw) -> SystemSpec | SafetySpec:
    """Load either kind of problem file, dispatching on its keys."""
    doc = _read_json(path)
    if "domain_h" in doc:
        return safety_from_dict(doc, **kw)
    return system_from_dict(doc, **kw)


def _read_json(path: str | Path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SpecError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SpecError("top-level JSON value must be an object")
    return doc


def spec_to_dict(spec: SystemSpec | SafetySpec) -> dict:
    doc: dict[str, Any] = {}
    if spec.name:
        doc["name"] = spec.name
    doc["state_vars"] = list(spec.state_vars)
    doc["input_vars"] = list(spec.input_vars)
    doc["dynamics"] = [p.render() for p in spec.dynamics]
    if isinstance(spec, SystemSpec):
        doc["safe_h"] = spec.safe_h.render()
        doc["target_g"] = spec.target_g.render()
        if spec.xhat_h is not None:
            doc["xhat_h"] = spec.xhat_h.render()
    else:
        doc["domain_h"] = [p.render() for p in spec.domain]
        doc["init_hI"] = [p.render() for p in spec.init]
        doc["unsafe_hU"] = [p.render() for p in spec.unsafe]
    doc["input_lower"] = list(spec.input_lower)
    doc["input_upper"] = list(spec.input_upper)
    doc["lambda"] = spec.lam
    if spec.state_bounds is not None:
        doc["state_bounds"] = [list(b) for b in spec.state_bounds]
    if spec.defaults:
        doc["solve"] = dict(spec.defaults)
    return doc


def with_lambda(spec, lam: float):
    """Copy of ``spec`` with a different lambda, re-validated."""
    doc = spec_to_dict(spec)
    doc["lambda"] = lam
    return safety_from_dict(doc, check_samples=0) if isinstance(spec, SafetySpec) \
        else system_from_dict(doc, check_samples=0)


# ---------------------------------------------------------------------------
# certificates


def certificate_to_dict(cert) -> dict:
    """JSON-ready view of a certificate; contains no timings so reruns compare equal."""
    doc = {
        "kind": cert.kind,
        "v": cert.v.render(),
        "lambda": cert.lam,
        "multipliers": [{"name": k, "poly": p.render()} for k, p in cert.multipliers.items()],
        "status": cert.status,
        "solver_iters": cert.solver_iters,
        "gamma": cert.gamma,
        "objective": cert.objective_value,
        "shift": cert.shift,
    }
    if cert.controller is not None:
        doc["controller"] = [p.render() for p in cert.controller]
    if cert.params:
        doc["params"] = dict(cert.params)
    return doc


def certificate_from_dict(doc: Mapping, variables: Sequence[str]):
    from .soscomp import Certificate

    ctrl = doc.get("controller")
    return Certificate(
        kind=doc["kind"],
        v=parse_polynomial(doc["v"], variables),
        lam=float(doc["lambda"]),
        multipliers={m["name"]: parse_polynomial(m["poly"], variables) for m in doc.get("multipliers", [])},
        status=doc.get("status", "optimal"),
        solver_iters=int(doc.get("solver_iters", 0)),
        objective_value=doc.get("objective"),
        gamma=doc.get("gamma"),
        shift=float(doc.get("shift", 0.0)),
        controller=tuple(parse_polynomial(t, variables) for t in ctrl) if ctrl else None,
        params=dict(doc.get("params", {})),
    )


def dump_json(obj: Any, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
