"""Matplotlib figures for certificates, iteration histories and rollouts."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .specio import SafetySpec  # noqa: E402
from .validate import levelset_grid  # noqa: E402


def _grid_values(poly, spec, pts):
    return poly.evaluate_array(pts, spec.state_vars)


def plot_certificate(path, vs: Sequence, spec, resolution: int = 201, labels: Sequence[str] | None = None,
                     dims: tuple[int, int] = (0, 1)) -> Path:
    """Zero level sets of one or more certificates over the safe set (or domain).

    One state: v(x) curves with the safe and target sets shaded.  Two or more:
    contours v = 0 in the plane ``dims`` with the other coordinates at the box
    centre, together with the boundaries of the defining sets.
    """
    path = Path(path)
    labels = list(labels) if labels is not None else [f"v{k}" for k in range(len(vs))]
    fig, ax = plt.subplots(figsize=(5.5, 4.2))
    safety = isinstance(spec, SafetySpec)
    if spec.n == 1:
        for v, lab in zip(vs, labels):
            xs, vals = levelset_grid(v, spec, resolution)
            ax.plot(xs[:, 0], vals, label=lab)
        ax.axhline(0.0, color="k", lw=0.6)
        if not safety:
            xs, _ = levelset_grid(vs[0], spec, resolution)
            inside_t = _grid_values(spec.target_g, spec, xs) < 0
            ax.fill_between(xs[:, 0], 0, 1, where=inside_t, color="tab:green", alpha=0.15,
                            transform=ax.get_xaxis_transform(), label="target")
        ax.set_xlabel(spec.state_vars[0])
        ax.set_ylabel("v")
    else:
        pts = None
        for k, (v, lab) in enumerate(zip(vs, labels)):
            pts, vals = levelset_grid(v, spec, resolution, dims)
            A = pts[:, dims[0]].reshape(resolution, resolution)
            B = pts[:, dims[1]].reshape(resolution, resolution)
            cs = ax.contour(A, B, vals.reshape(resolution, resolution), levels=[0.0],
                            colors=[f"C{k}"], linewidths=1.4)
            ax.plot([], [], color=f"C{k}", label=lab)
        A = pts[:, dims[0]].reshape(resolution, resolution)
        B = pts[:, dims[1]].reshape(resolution, resolution)
        if safety:
            sets = [(p, "k", "domain") for p in spec.domain] + [(p, "tab:green", "initial") for p in spec.init] \
                + [(p, "tab:red", "unsafe") for p in spec.unsafe]
        else:
            sets = [(spec.safe_h, "k", "safe set"), (spec.target_g, "tab:green", "target")]
        seen = set()
        for p, col, name in sets:
            vals = _grid_values(p, spec, pts).reshape(resolution, resolution)
            if vals.min() < 0 < vals.max():
                ax.contour(A, B, vals, levels=[0.0], colors=col, linestyles="--", linewidths=0.9)
                if name not in seen:
                    ax.plot([], [], color=col, ls="--", label=name)
                    seen.add(name)
        ax.set_xlabel(spec.state_vars[dims[0]])
        ax.set_ylabel(spec.state_vars[dims[1]])
        ax.set_aspect("equal", adjustable="box")
    ax.legend(fontsize=8, loc="best")
    ax.set_title(spec.name or "certificate")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_history(path, records, title: str = "") -> Path:
    """Per-iteration gamma and the gamma of the union of accepted certificates."""
    path = Path(path)
    k = [r.index for r in records]
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.plot(k, [r.gamma for r in records], "o-", label="current certificate")
    ax.plot(k, [r.union_gamma for r in records], "s--", label="union")
    ax.set_xlabel("iteration")
    ax.set_ylabel("gamma")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_trajectories(path, spec, trajectories, v=None, dims: tuple[int, int] = (0, 1)) -> Path:
    """State paths (time series for one state, phase plane otherwise)."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    for k, tr in enumerate(trajectories):
        s = np.asarray(tr.states)
        if spec.n == 1:
            ax.plot(np.arange(len(s)), s[:, 0], color=f"C{k % 10}", lw=1.0, label=tr.verdict if k < 5 else None)
        else:
            ax.plot(s[:, dims[0]], s[:, dims[1]], color=f"C{k % 10}", lw=1.0)
            ax.plot(s[0, dims[0]], s[0, dims[1]], "o", color=f"C{k % 10}", ms=3)
    if spec.n == 1:
        ax.set_xlabel("step")
        ax.set_ylabel(spec.state_vars[0])
    else:
        ax.set_xlabel(spec.state_vars[dims[0]])
        ax.set_ylabel(spec.state_vars[dims[1]])
    ax.set_title("greedy rollouts")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_bench(path, rows: Sequence[dict]) -> Path:
    """Initial versus final gamma per benchmark."""
    path = Path(path)
    names = [r["name"] for r in rows]
    x = np.arange(len(rows))
    fig, ax = plt.subplots(figsize=(max(4.0, 1.1 * len(rows)), 3.6))
    ax.bar(x - 0.2, [r.get("gamma_initial") or 0.0 for r in rows], 0.4, label="initial")
    ax.bar(x + 0.2, [r.get("gamma_final") or 0.0 for r in rows], 0.4, label="final")
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("gamma")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
