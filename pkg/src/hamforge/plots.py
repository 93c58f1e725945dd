"""Matplotlib rendering of the gap-scaling figure.

SVG output is kept byte-reproducible: fixed hash salt for element ids and no
embedded creation date.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .fitting import ModelChoice, ScalingSeries

matplotlib.rcParams["svg.hashsalt"] = "hamforge"


def render_scaling_figure(
    path: str,
    series: ScalingSeries,
    choice: ModelChoice,
    log_y: bool = False,
    title: str = "",
) -> None:
    """Scatter of 1/lambda versus n with both fitted curves overlaid."""
    n, y = series.n, series.y
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.plot(n, y, "o", color="#1f4e79", label="measured")
    fine = np.linspace(n.min(), n.max(), 200)
    for fit, style in ((choice.exponential, "-"), (choice.quadratic, "--")):
        width = 1.8 if fit.model == choice.best else 1.0
        ax.plot(fine, fit.predict(fine), style, linewidth=width,
                label=f"{fit.model} fit (rmse {fit.rmse:.3g})")
    if log_y:
        ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel(r"$1/\lambda_{\min}$")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
