"""Rendering of figure tables to PNG files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_table(table, path) -> None:
    """Plot every column of a figure table against its first column."""
    data = np.asarray(table.rows, dtype=float)
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    x = data[:, 0]
    for j, name in enumerate(table.columns[1:], start=1):
        ax.plot(x, data[:, j], label=name)
    ax.set_xlabel(table.columns[0])
    ax.set_title(table.figure_id)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
