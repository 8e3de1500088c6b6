"""Command-line front end.

Every command writes into an output directory: ``manifest.json`` (the run
recipe, persisted verbatim), certificate JSON files without timings, a
``summary.json`` that does carry timings, CSV tables and PNG figures.

Exit codes: 0 success, 2 input error, 3 solver failure, 4 validation failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from .specio import (PolynomialSyntaxError, SafetySpec, SolveConfig, SpecError, SystemSpec,
                     certificate_from_dict, dump_json, load_spec, parse_polynomial, with_lambda)

EXIT_OK, EXIT_INPUT, EXIT_SOLVER, EXIT_VALIDATION = 0, 2, 3, 4

log = logging.getLogger("crasynth")


class InputError(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration


def benchmark_dir() -> Path:
    return Path(str(resources.files("crasynth") / "benchmarks"))


def resolve_spec_path(name: str) -> Path:
    """A path, or the stem of a bundled benchmark file."""
    p = Path(name)
    if p.exists():
        return p
    bundled = benchmark_dir() / f"{name}.json"
    if bundled.exists():
        return bundled
    raise InputError(f"spec file not found: {name}")


def _load(args):
    if not args.spec:
        raise InputError("--spec is required")
    path = resolve_spec_path(args.spec)
    spec = load_spec(path)
    if args.lam is not None:
        spec = with_lambda(spec, args.lam)
    return path, spec


def _setting(args, attr, defaults, key, fallback):
    val = getattr(args, attr, None)
    if val is not None:
        return val
    return defaults.get(key, fallback)


def solve_config(args, spec) -> SolveConfig:
    d = spec.defaults or {}
    objective = _setting(args, "objective", d, "objective", "closed")
    return SolveConfig(
        deg_v=int(_setting(args, "deg_v", d, "deg_v", 4)),
        deg_multipliers=_setting(args, "deg_s", d, "deg_s", None),
        deg_controller=int(_setting(args, "deg_u", d, "deg_u", 2)),
        objective_mode="sample_sum" if objective == "sample" else "closed_form",
        objective_samples=int(d.get("objective_samples", 100)),
        rng_seed=args.seed,
    )


def iteration_config(args, spec):
    from .synth import IterationConfig

    d = spec.defaults or {}
    return IterationConfig(
        K=int(_setting(args, "iters", d, "iters", 10)),
        eps0=float(_setting(args, "eps0", d, "eps0", 0.5)),
        schedule_factor=float(_setting(args, "eps_factor", d, "eps_factor", 0.8)),
        delta=float(_setting(args, "delta", d, "delta", 0.1)),
        deg_u=int(_setting(args, "deg_u", d, "deg_u", 2)),
        n_states=int(_setting(args, "states", d, "states", 50)),
        n_controls=int(_setting(args, "controls", d, "controls", 5)),
        state_mode=_setting(args, "state_mode", d, "state_mode", "grid"),
        greedy=bool(args.greedy),
        volume_samples=int(args.samples),
        seed=int(args.seed),
        solve=solve_config(args, spec),
    )


def make_solver(args, out: Path):
    """None for the embedded solver, else a callable going through SDPA files."""
    if args.solver == "embedded":
        return None
    from .sdpsolve import read_sdpa_solution, write_sdpa

    counter = {"k": 0}

    def solver(prob):
        counter["k"] += 1
        target = out / f"problem_{counter['k']}.dat-s"
        write_sdpa(prob, target)
        sol_path = Path(args.sdpa_solution) if args.sdpa_solution else target.with_suffix(".out")
        if not sol_path.exists():
            raise InputError(f"SDP problem written to {target}; solve it externally and pass "
                             f"the result with --sdpa-solution")
        return read_sdpa_solution(prob, sol_path)

    return solver


def manifest_for(args, spec_path) -> dict:
    overrides = {k: v for k, v in sorted(vars(args).items())
                 if k not in ("command", "spec", "out", "seed", "func", "verbose") and v is not None}
    return {"command": args.command, "spec": str(spec_path) if spec_path else None,
            "seed": args.seed, "overrides": overrides}


def output_dir(args, manifest: dict) -> Path:
    if args.out:
        out = Path(args.out)
    else:
        digest = hashlib.sha256(json.dumps(manifest, sort_keys=True).encode()).hexdigest()[:10]
        out = Path("runs") / f"{args.command}-{digest}"
    out.mkdir(parents=True, exist_ok=True)
    dump_json(dict(manifest, out=str(out)), out / "manifest.json")
    return out


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _load_cert(args, spec):
    if args.cert:
        with open(args.cert) as fh:
            return certificate_from_dict(json.load(fh), spec.state_vars).v
    if args.poly:
        return parse_polynomial(args.poly, spec.state_vars)
    raise InputError("need --cert or --poly")


# ---------------------------------------------------------------------------
# commands


def _reach_avoid_summary(cert, spec, args, report, out, seconds) -> dict:
    from .validate import estimate_volume, positive_intervals

    vol = estimate_volume(cert.v, spec, args.samples, args.seed)
    cert.gamma = vol.gamma
    summary = {"gamma": vol.gamma, "gamma_std_error": vol.std_error, "n_samples": vol.n_samples,
               "status": cert.status, "shift": cert.shift, "seconds": round(seconds, 3),
               "validation": report.to_dict()}
    if spec.n == 1:
        iv = positive_intervals(cert.v, spec)
        summary["intervals"] = iv
        for a, b in iv:
            print(f"certified interval: {a:.4f} < {spec.state_vars[0]} < {b:.4f}")
        if not iv:
            print("certified set is empty")
    print(f"gamma = {vol.gamma:.4f} (+/- {vol.std_error:.4f}, n = {vol.n_samples})")
    return summary


def cmd_init(args) -> int:
    from .plotting import plot_certificate
    from .synth import solve_initial
    from .validate import validate_certificate

    path, spec = _load(args)
    if not isinstance(spec, SystemSpec):
        raise InputError("init needs a reach-avoid spec")
    man = manifest_for(args, path)
    out = output_dir(args, man)
    t0 = time.perf_counter()
    cert = solve_initial(spec, solve_config(args, spec), solver=make_solver(args, out))
    seconds = time.perf_counter() - t0
    report = validate_certificate(cert, spec, seed=args.seed)
    summary = _reach_avoid_summary(cert, spec, args, report, out, seconds)
    dump_json(cert.to_dict(), out / "certificate.json")
    dump_json(summary, out / "summary.json")
    plot_certificate(out / "certificate.png", [cert.v], spec, labels=["initial"])
    print(report.summary())
    return EXIT_OK if report.passed else EXIT_VALIDATION


def cmd_iterate(args) -> int:
    from .plotting import plot_certificate, plot_history
    from .synth import run_alg1
    from .validate import validate_certificate

    path, spec = _load(args)
    if not isinstance(spec, SystemSpec):
        raise InputError("iterate needs a reach-avoid spec")
    it = iteration_config(args, spec)
    man = manifest_for(args, path)
    out = output_dir(args, man)

    def progress(k, cert, rec):
        eps = "-" if rec.epsilon is None else f"{rec.epsilon:.4f}"
        print(f"iteration {k}: eps {eps} status {rec.status} gamma {rec.gamma:.4f} "
              f"union {rec.union_gamma:.4f}")
        dump_json(cert.to_dict(), out / f"certificate_{k:02d}.json")

    t0 = time.perf_counter()
    res = run_alg1(spec, it, solver=make_solver(args, out), on_iteration=progress)
    seconds = time.perf_counter() - t0
    _write_csv(out / "history.csv",
               ["iteration", "epsilon", "status", "gamma", "union_gamma", "fit_residual", "accepted"],
               [[r.index, "" if r.epsilon is None else r.epsilon, r.status, r.gamma, r.union_gamma,
                 "" if r.fit_residual is None else r.fit_residual, int(ok)]
                for r, ok in zip(res.records, res.accepted)])
    final = res.certificates[-1]
    report = validate_certificate(final, spec, seed=args.seed)
    g0, g1 = res.records[0].gamma, res.records[-1].gamma
    summary = {"gamma_initial": g0, "gamma_final": g1,
               "union_gamma": res.records[-1].union_gamma,
               "growth": (g1 - g0) / g0 if g0 > 0 else None,
               "accepted": res.accepted, "seconds": round(seconds, 3),
               "validation": report.to_dict()}
    if spec.n == 1:
        from .validate import positive_intervals
        summary["intervals_initial"] = positive_intervals(res.certificates[0].v, spec)
        summary["intervals_final"] = positive_intervals(final.v, spec)
    dump_json(summary, out / "summary.json")
    plot_history(out / "history.png", res.records, spec.name)
    plot_certificate(out / "certificates.png", [res.certificates[0].v, final.v], spec,
                     labels=["initial", "final"])
    print(report.summary())
    return EXIT_OK if report.passed else EXIT_VALIDATION


def cmd_safety(args) -> int:
    from .plotting import plot_certificate
    from .synth import solve_safety
    from .validate import validate_certificate

    path, spec = _load(args)
    if not isinstance(spec, SafetySpec):
        raise InputError("safety needs a safety spec")
    man = manifest_for(args, path)
    out = output_dir(args, man)
    t0 = time.perf_counter()
    cert = solve_safety(spec, solve_config(args, spec), solver=make_solver(args, out))
    seconds = time.perf_counter() - t0
    report = validate_certificate(cert, spec, seed=args.seed)
    dump_json(cert.to_dict(), out / "certificate.json")
    dump_json({"status": cert.status, "sound": cert.params.get("sound"), "seconds": round(seconds, 3),
               "validation": report.to_dict()}, out / "summary.json")
    plot_certificate(out / "barrier.png", [cert.v], spec, labels=["B = 0"])
    print(f"barrier found ({cert.status}) in {seconds:.2f} s; residuals within margins: "
          f"{cert.params.get('sound')}")
    print(report.summary())
    return EXIT_OK if report.passed else EXIT_VALIDATION


def cmd_volume(args) -> int:
    from .validate import estimate_volume

    path, spec = _load(args)
    v = _load_cert(args, spec)
    out = output_dir(args, manifest_for(args, path))
    vol = estimate_volume(v, spec, args.samples, args.seed)
    dump_json({"gamma": vol.gamma, "std_error": vol.std_error, "n_samples": vol.n_samples,
               "seed": vol.seed}, out / "volume.json")
    print(f"gamma = {vol.gamma:.6f} (+/- {vol.std_error:.6f})")
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .plotting import plot_trajectories
    from .validate import simulate_greedy

    path, spec = _load(args)
    if not isinstance(spec, SystemSpec):
        raise InputError("simulate needs a reach-avoid spec")
    v = _load_cert(args, spec)
    if not args.x0:
        raise InputError("need at least one --x0")
    out = output_dir(args, manifest_for(args, path))
    trajs, rows = [], []
    for k, text in enumerate(args.x0):
        try:
            x0 = [float(t) for t in text.split(",")]
        except ValueError:
            raise InputError(f"bad --x0 value: {text}") from None
        if len(x0) != spec.n:
            raise InputError(f"--x0 needs {spec.n} comma-separated values")
        try:
            tr = simulate_greedy(v, spec, x0, args.horizon, args.controls or 101)
        except ValueError as exc:
            raise InputError(str(exc)) from None
        trajs.append(tr)
        rows.append([k, text, tr.verdict, tr.steps])
        print(f"x0 = {text}: {tr.verdict} after {tr.steps} steps")
        _write_csv(out / f"trajectory_{k}.csv", list(spec.state_vars) + list(spec.input_vars),
                   [list(s) + (list(u) if i < tr.steps else [""] * spec.m)
                    for i, (s, u) in enumerate(zip(tr.states, list(tr.controls) + [None]))])
    _write_csv(out / "verdicts.csv", ["index", "x0", "verdict", "steps"], rows)
    plot_trajectories(out / "trajectories.png", spec, trajs)
    return EXIT_OK


def cmd_levelset(args) -> int:
    from .plotting import plot_certificate
    from .validate import write_levelset_csv

    path, spec = _load(args)
    v = _load_cert(args, spec)
    out = output_dir(args, manifest_for(args, path))
    n = write_levelset_csv(out / "levelset.csv", v, spec, args.grid)
    plot_certificate(out / "levelset.png", [v], spec, resolution=args.grid, labels=["v"])
    print(f"wrote {n} grid points")
    return EXIT_OK


def cmd_bench(args) -> int:
    """Initial and iterated certificates for a list of bundled benchmarks."""
    from .plotting import plot_bench, plot_history
    from .synth import SynthesisError, run_alg1, solve_safety
    from .validate import validate_certificate

    names = args.names or ["running_1d", "vanderpol_2d", "reach_2d_grid", "bilinear_2d",
                           "safe_two_room", "safe_lorenz_12d"]
    man = manifest_for(args, None)
    out = output_dir(args, man)
    rows, failed = [], False
    for name in names:
        spec = load_spec(resolve_spec_path(name))
        if args.lam is not None:
            spec = with_lambda(spec, args.lam)
        t0 = time.perf_counter()
        row = {"name": name}
        try:
            if isinstance(spec, SafetySpec):
                cert = solve_safety(spec, solve_config(args, spec))
                rep = validate_certificate(cert, spec, seed=args.seed)
                row.update(kind="safety", status=cert.status, sound=cert.params.get("sound"),
                           validated=rep.passed)
                dump_json(cert.to_dict(), out / f"{name}_certificate.json")
            else:
                res = run_alg1(spec, iteration_config(args, spec))
                rep = validate_certificate(res.certificates[-1], spec, seed=args.seed)
                row.update(kind="reach-avoid", status=res.records[-1].status,
                           gamma_initial=res.records[0].gamma, gamma_final=res.records[-1].gamma,
                           union_gamma=res.records[-1].union_gamma, validated=rep.passed)
                dump_json(res.certificates[-1].to_dict(), out / f"{name}_certificate.json")
                plot_history(out / f"{name}_history.png", res.records, name)
            failed |= not rep.passed
        except SynthesisError as exc:
            row.update(status=exc.status, message=str(exc))
        row["seconds"] = round(time.perf_counter() - t0, 2)
        print(json.dumps(row, sort_keys=True))
        rows.append(row)
    keys = ["name", "kind", "status", "gamma_initial", "gamma_final", "union_gamma", "sound", "validated",
            "seconds", "message"]
    _write_csv(out / "bench.csv", keys, [[r.get(k, "") for k in keys] for r in rows])
    dump_json(rows, out / "bench.json")
    ra = [r for r in rows if r.get("kind") == "reach-avoid"]
    if ra:
        plot_bench(out / "bench.png", ra)
    return EXIT_VALIDATION if failed else EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", help="spec JSON file or bundled benchmark name")
    common.add_argument("--out", help="output directory (default: runs/<command>-<manifest hash>)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--deg-v", type=int, dest="deg_v")
    common.add_argument("--deg-s", type=int, dest="deg_s", help="multiplier degree")
    common.add_argument("--deg-u", type=int, dest="deg_u", help="controller degree")
    common.add_argument("--eps0", type=float)
    common.add_argument("--eps-factor", type=float, dest="eps_factor")
    common.add_argument("--delta", type=float)
    common.add_argument("--iters", type=int)
    common.add_argument("--lambda", type=float, dest="lam")
    common.add_argument("--samples", type=int, default=10 ** 6, help="Monte Carlo volume samples")
    common.add_argument("--grid", type=int, default=101, help="level-set grid points per axis")
    common.add_argument("--objective", choices=["closed", "sample"])
    common.add_argument("--solver", choices=["embedded", "sdpa-file"], default="embedded")
    common.add_argument("--sdpa-solution", dest="sdpa_solution", help="solution file for --solver sdpa-file")
    common.add_argument("--states", type=int, help="argmax data states")
    common.add_argument("--controls", type=int, help="control grid points per axis")
    common.add_argument("--state-mode", choices=["grid", "random"], dest="state_mode")
    common.add_argument("--greedy", action="store_true", default=None, help="pure greedy refinement")
    common.add_argument("--cert", help="certificate JSON (volume, simulate, levelset)")
    common.add_argument("--poly", help="polynomial instead of a certificate (volume, simulate, levelset)")
    common.add_argument("--x0", action="append", help="initial state, comma separated (repeatable)")
    common.add_argument("--horizon", type=int, default=10 ** 5)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="crasynth", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, help_ in [
        ("init", cmd_init, "initial certificate under uniform inputs"),
        ("iterate", cmd_iterate, "iterative refinement with fitted controllers"),
        ("safety", cmd_safety, "barrier certificate for a safety spec"),
        ("volume", cmd_volume, "Monte Carlo volume of {v > 0}"),
        ("simulate", cmd_simulate, "greedy closed-loop rollouts"),
        ("levelset", cmd_levelset, "grid export and figure of a certificate"),
        ("bench", cmd_bench, "run bundled benchmarks and write tables and figures"),
    ]:
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=fn)
        if name == "bench":
            sp.add_argument("names", nargs="*", help="benchmark names (default: a desk-scale subset)")
    return p


def main(argv=None) -> int:
    from .semisets import ThinSetError, UnsupportedSetError
    from .synth import SynthesisError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if args.greedy is None:
        args.greedy = False
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    np.seterr(over="ignore", invalid="ignore")
    try:
        return args.func(args)
    except (InputError, SpecError, PolynomialSyntaxError, FileNotFoundError, ThinSetError,
            UnsupportedSetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SynthesisError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
