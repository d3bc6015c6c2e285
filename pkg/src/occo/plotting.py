"""Log-log PNG panels next to the suite CSVs. The CSV files stay authoritative."""

from __future__ import annotations

import os
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

LABELS = {
    "avg_dual_gap": "Average Dual-Gap",
    "avg_ne_regret": "Average NE-regret",
    "avg_tracking_error": "Average tracking error",
    "avg_residual": "Average residual",
    "eta": "Learning rate",
    "path_length": "Path length",
    "bound_rhs": "Certificate bound",
}

STYLE = {
    "figure.figsize": (5.0, 3.2),
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "lines.linewidth": 1.6,
}


def plot_panel(traces, metric: str, path, title: str | None = None) -> None:
    """One panel: `metric` against the round index for each trace, log-log axes."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for tr in traces:
            rounds = np.asarray(tr.rounds, dtype=float)
            vals = tr.series(metric)
            # log axes cannot show nonpositive values
            keep = vals > 0
            ax.plot(rounds[keep], vals[keep], label=tr.config.label)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("T")
        ax.set_ylabel(LABELS.get(metric, metric))
        if title:
            ax.set_title(title)
        ax.legend(loc="best")
        fig.tight_layout()
        path = Path(path)
        tmp = path.with_name(f".{path.name}.tmp")
        try:
            fig.savefig(tmp, dpi=150, format="png")
            os.replace(tmp, path)
        finally:
            plt.close(fig)
            if tmp.exists():
                tmp.unlink()
