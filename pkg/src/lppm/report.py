"""Render trade-off figures for a finished sweep next to its CSV output."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_PANELS = (
    ("p_ae", "Average adversary error [km]"),
    ("p_ce", "Conditional entropy [bits]"),
    ("p_gi", "Geo-indistinguishability level 1/eps [km]"),
    ("p_wc_ae", "Worst-case-output adversary error [km]"),
)


def render_figures(rows, out_csv_path) -> list[Path]:
    """Write one PNG per metric panel alongside the CSV, named after it.

    Rows without metrics (error rows) and missing metric values are skipped.
    """
    base = Path(out_csv_path)
    stem = base.with_suffix("")
    by_mech: dict[str, list] = {}
    for r in rows:
        if r.metrics is not None:
            by_mech.setdefault(r.mechanism, []).append(r)

    written = []
    for attr, label in _PANELS:
        fig, ax = plt.subplots(figsize=(5.2, 3.6))
        plotted = False
        for name, rs in sorted(by_mech.items()):
            pts = [
                (r.metrics.q_avg, getattr(r.metrics, attr))
                for r in rs
                if getattr(r.metrics, attr) is not None
                and not math.isnan(getattr(r.metrics, attr))
                and not math.isinf(getattr(r.metrics, attr))
            ]
            if not pts:
                continue
            pts.sort()
            ax.plot([p[0] for p in pts], [p[1] for p in pts],
                    marker="o", markersize=3, label=name)
            plotted = True
        if not plotted:
            plt.close(fig)
            continue
        ax.set_xlabel("Average quality loss [km]")
        ax.set_ylabel(label)
        ax.legend(fontsize=8)
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        out = Path(f"{stem}_{attr}.png")
        fig.savefig(out, dpi=150)
        plt.close(fig)
        written.append(out)
    return written
