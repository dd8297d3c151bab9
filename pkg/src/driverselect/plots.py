"""SVG scatter and histogram plots rendered with matplotlib's Agg backend."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["scatter_svg", "histogram_svg"]

# no timestamp, fixed element ids: identical data gives identical files
_SVG_META = {"Date": None}


def _save(fig, path):
    with matplotlib.rc_context({"svg.hashsalt": "driverselect"}):
        fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)


def scatter_svg(path, x, y, xlabel, ylabel, fit=None):
    """Scatter of ``(x, y)`` with the least-squares line when ``fit`` has a slope."""
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.scatter(x, y, s=12)
    if fit is not None and fit.get("slope") not in (None, "n/a") and len(x):
        xs = np.array([min(x), max(x)])
        ax.plot(xs, fit["intercept"] + fit["slope"] * xs, color="k", lw=1,
                label=f"slope {fit['slope']:.3g}, r = {fit['pearson']:.3f}")
        ax.legend(loc="best", fontsize=8)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    _save(fig, path)


def histogram_svg(path, counts, edges, xlabel):
    """Bar histogram from precomputed ``counts`` and bin ``edges``; the zero line is marked."""
    fig, ax = plt.subplots(figsize=(5, 4))
    if len(counts):
        edges = np.asarray(edges)
        ax.bar(edges[:-1], counts, width=np.diff(edges), align="edge", edgecolor="k")
        if edges[0] < 0 < edges[-1]:
            ax.axvline(0.0, color="grey", lw=1, ls="--")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("realizations")
    fig.tight_layout()
    _save(fig, path)
