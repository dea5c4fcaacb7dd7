"""Figures for rate reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

LINE_IDS = ("fit-line", "lower-bound-slope", "upper-bound-slope")


def plot_rate(table, fit, bounds, path, title: str | None = None):
    """gap/eps against log(1/eps), with the fitted line and both bound slopes.

    The bound slopes are drawn through the centroid of the fitted rows so
    that only their slopes are compared.
    """
    eps = table.epsilons
    x = np.log(1.0 / eps)
    y = table.gaps / eps
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(x, y, "o", color="k", ms=4, label="gap / eps")
    if fit is not None:
        used = np.log(1.0 / np.asarray(fit.epsilons_used))
        xs = np.linspace(x.min(), x.max(), 50)
        ax.plot(xs, fit.C * xs + fit.b, "-", color="C0", gid=LINE_IDS[0],
                label=f"fit C = {fit.C:.3f}")
        x0 = used.mean()
        y0 = fit.C * x0 + fit.b
        if bounds is not None:
            for slope, gid, color, name in (
                (bounds.lower_bound, LINE_IDS[1], "C2", "lower"),
                (bounds.upper_bound, LINE_IDS[2], "C3", "upper"),
            ):
                ax.plot(xs, y0 + slope * (xs - x0), "--", color=color, gid=gid,
                        label=f"{name} slope {slope:g}")
    ax.set_xlabel("log(1/eps)")
    ax.set_ylabel("(MOT_eps - MOT_0) / eps")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
