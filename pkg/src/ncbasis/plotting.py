"""Static figures written next to the CSV/JSON reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 120,
}


def plot_norm_report(report, path) -> None:
    """Estimated partial-sum norms against the bound, one marker per scheduled m."""
    rows = [r for r in report.rows if r.m > 0 and np.isfinite(r.estimate)]
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5.0, 3.2))
        ms = [r.m for r in rows]
        ax.plot(ms, [r.estimate for r in rows], "o-", ms=3, lw=1, label="lower-bound estimate")
        if rows:
            ax.axhline(rows[0].bound, color="C3", ls="--", lw=1, label=f"{report.bound_kind} bound {rows[0].bound:.4g}")
        bad = [r for r in rows if r.passed is False]
        if bad:
            ax.plot([r.m for r in bad], [r.estimate for r in bad], "x", color="C3", ms=6, label="fails bound")
        ax.set_xlabel("m (number of kept terms)")
        ax.set_ylabel("partial-sum norm")
        ax.set_title(f"{report.suite}: alpha={report.alpha}, level={report.level}, {report.spec.label()}", fontsize=9)
        ax.set_ylim(bottom=0)
        ax.legend(frameon=False, loc="lower right")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def plot_measure(table, path) -> None:
    n = len(table.masses)
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5.0, 3.0))
        ax.bar(np.arange(n) / n, np.asarray(table.masses) * n, width=1 / n, align="edge", lw=0)
        ax.set_xlim(0, 1)
        ax.set_xlabel("t")
        ax.set_ylabel("density of dyadic mass")
        ax.set_title(f"alpha={table.alpha:g}, level={table.level}", fontsize=9)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def plot_commutative(ch, path, count: int = 8) -> None:
    steps = ch.steps[:count]
    n = steps.shape[1]
    edges = np.arange(n + 1) / n
    with plt.rc_context(RC):
        fig, axes = plt.subplots(len(steps), 1, figsize=(4.5, 0.8 * len(steps) + 0.4), sharex=True)
        for j, (ax, row) in enumerate(zip(np.atleast_1d(axes), steps)):
            ax.stairs(row, edges, lw=1)
            ax.axhline(0, color="0.7", lw=0.5)
            ax.set_ylabel(f"chi_{j}", rotation=0, ha="right", va="center")
            ax.set_yticks([])
        np.atleast_1d(axes)[-1].set_xlabel("t")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
