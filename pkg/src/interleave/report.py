"""Figures written next to the delimited outputs (requires matplotlib)."""
from __future__ import annotations

import math
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .graph import MapperGraph

PathLike = Union[str, Path]


def _plt():
    try:
        import matplotlib
    except ImportError as exc:  # pragma: no cover - depends on the environment
        raise RuntimeError("plotting needs matplotlib: pip install 'interleave[plot]'") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # fixed metadata keeps repeated runs byte-identical
    fig.savefig(path, dpi=120, bbox_inches="tight", metadata={"Software": None})
    fig.clf()
    return path


def graph_layout(g: MapperGraph) -> np.ndarray:
    """``(x, level)`` per vertex; vertices on a level are spread symmetrically."""
    pos = np.zeros((g.n_vertices, 2))
    for level in np.unique(g.vertex_level):
        idx = np.flatnonzero(g.vertex_level == level)
        pos[idx, 0] = np.arange(len(idx)) - (len(idx) - 1) / 2
        pos[idx, 1] = level
    return pos


def plot_graph(g: MapperGraph, path: PathLike, title: Optional[str] = None) -> Path:
    plt = _plt()
    pos = graph_layout(g)
    fig, ax = plt.subplots(figsize=(3, 5))
    for a, b in zip(g.edge_lower, g.edge_upper):
        ax.plot(pos[[a, b], 0], pos[[a, b], 1], color="0.4", lw=1)
    ax.scatter(pos[:, 0], pos[:, 1], s=14, color="tab:blue", zorder=3)
    ax.set_ylabel("level")
    ax.set_xticks([])
    ax.set_title(title or f"{g.n_vertices} vertices, {g.n_edges} edges")
    return _save(fig, path)


def plot_trace(trace, path: PathLike, title: Optional[str] = None) -> Path:
    """Bound ``n + k_n`` against ``n`` for every evaluated shift."""
    plt = _plt()
    steps = sorted(trace.steps, key=lambda s: s.n)
    ns = [s.n for s in steps]
    finite = [s.bound if math.isfinite(s.bound) else np.nan for s in steps]
    fig, ax = plt.subplots(figsize=(4, 3))
    ax.plot(ns, finite, marker="o", label="n + k_n")
    ax.plot(ns, ns, ls="--", color="0.6", label="n")
    ax.axhline(trace.bound, color="tab:red", lw=0.8, label=f"bound {trace.bound:g}")
    ax.set_xlabel("n")
    ax.set_ylabel("bound")
    ax.legend(fontsize=7)
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_matrix(values: np.ndarray, labels: Sequence[str], path: PathLike, title: str = "") -> Path:
    plt = _plt()
    v = np.asarray(values, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(np.where(np.isfinite(v), v, np.nan), cmap="viridis")
    fig.colorbar(im, ax=ax)
    if len(labels) <= 60:
        ax.set_xticks(range(len(labels)))
        ax.set_xticklabels(labels, rotation=90, fontsize=5)
        ax.set_yticks(range(len(labels)))
        ax.set_yticklabels(labels, fontsize=5)
    ax.set_title(title)
    return _save(fig, path)


def plot_confusion(report, path: PathLike) -> Path:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.imshow(report.confusion, cmap="Blues")
    for (i, j), c in np.ndenumerate(report.confusion):
        ax.text(j, i, str(int(c)), ha="center", va="center", fontsize=8)
    ax.set_xticks(range(len(report.classes)))
    ax.set_xticklabels(report.classes)
    ax.set_yticks(range(len(report.classes)))
    ax.set_yticklabels(report.classes)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_title(f"LOO accuracy {report.loo_accuracy:.1%} (k={report.k})")
    return _save(fig, path)
