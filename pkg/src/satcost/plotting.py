"""Figures for evaluation and portfolio reports (PNG via the Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "figure.figsize": (5.5, 4.0),
    "axes.labelsize": 11,
    "axes.titlesize": 11,
    "legend.fontsize": 9,
    "xtick.labelsize": 9,
    "ytick.labelsize": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
}

# no software/date stamps, so reruns are byte-identical
_PNG_META = {"Software": None}


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_PNG_META)
    plt.close(fig)


def plot_error_factor_curves(curves: dict[str, list[tuple[float, float]]], path,
                             title: str = "") -> None:
    """Fraction of instances within each error factor, one line per label."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for label, pts in curves.items():
            xs = [f for f, _ in pts]
            ys = [100 * v for _, v in pts]
            ax.plot(xs, ys, marker="o", ms=3, label=label)
        ax.set_xlabel("error factor")
        ax.set_ylabel("% of instances")
        ax.set_ylim(0, 100)
        if title:
            ax.set_title(title)
        ax.legend(loc="lower right")
        _save(fig, path)


def plot_chained(rows, path) -> None:
    """Within-factor-2 percentage per window, plain vs chained features."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for cls in sorted({r.cls for r in rows}):
            rs = [r for r in rows if r.cls == cls]
            x = [r.restart for r in rs]
            ax.plot(x, [100 * r.within2_plain for r in rs], marker="o", ms=3,
                    label=f"{cls} x_r")
            ax.plot(x, [100 * r.within2_chained for r in rs], marker="s", ms=3, ls="--",
                    label=f"{cls} chained")
        ax.set_xlabel("window (restart with a window)")
        ax.set_ylabel("% within factor 2")
        ax.set_ylim(0, 100)
        ax.legend(loc="lower right")
        _save(fig, path)


def plot_portfolio(table: dict[str, dict], columns, path) -> None:
    """Grouped bars of normalized cost per class; the dashed line is random selection."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        classes = list(table)
        width = 0.8 / max(len(columns), 1)
        for j, (key, title) in enumerate(columns):
            xs = [i + j * width for i in range(len(classes))]
            ax.bar(xs, [table[c][key] for c in classes], width, label=title)
        ax.axhline(1.0, color="k", ls="--", lw=0.8)
        ax.set_xticks([i + 0.4 - width / 2 for i in range(len(classes))], classes)
        ax.set_ylabel("cost / random selection")
        ax.legend(loc="upper right")
        _save(fig, path)
