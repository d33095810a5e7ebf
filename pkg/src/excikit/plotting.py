"""Population plots rendered from trajectory bundles (headless)."""
from __future__ import annotations

import os
import tempfile
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_populations(series, path, *, title="", ylabel="population"):
    """Write one PNG with a curve per ``(label, tau, population)`` entry.

    The file is written to a temporary name and renamed into place.
    """
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6.4, 4.0), dpi=120)
    for label, tau, pop in series:
        ax.plot(tau, pop, lw=1.2, label=label)
    ax.set_xlabel(r"$\tau$")
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.set_xlim(left=0)
    ax.set_ylim(bottom=0)
    if len(series) > 1:
        ax.legend(fontsize=8, frameon=False)
    fig.tight_layout()
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".png.tmp")
    os.close(fd)
    try:
        # metadata left empty so reruns give identical bytes
        fig.savefig(tmp, format="png", metadata={"Software": None})
        os.replace(tmp, path)
    finally:
        plt.close(fig)
        if os.path.exists(tmp):
            os.unlink(tmp)
    return path
