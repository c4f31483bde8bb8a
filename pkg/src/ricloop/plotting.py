"""Figure rendering for the report path.

Takes a metrics document (the dict form of a MetricsReport) and writes PNG
files next to the delimited exports. Uses the Agg backend so it works
headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _sector_mean_series(doc: dict):
    """Average the per-sector series onto the shared timestamp grid."""
    series = doc.get("sector_load_timeline", {})
    if not series:
        return [], [], [], []
    by_ts: dict[int, list] = {}
    for rows in series.values():
        for ts, observed, predicted, k in rows:
            slot = by_ts.setdefault(ts, [0.0, 0, 0.0, 0, 0])
            slot[0] += observed
            slot[1] += 1
            if predicted is not None:
                slot[2] += predicted
                slot[3] += 1
            slot[4] += k
    ts_sorted = sorted(by_ts)
    hours = [t / 3600.0 for t in ts_sorted]
    load = [by_ts[t][0] / by_ts[t][1] for t in ts_sorted]
    predicted = [
        by_ts[t][2] / by_ts[t][3] if by_ts[t][3] else None for t in ts_sorted
    ]
    modes = [by_ts[t][4] / by_ts[t][1] for t in ts_sorted]
    return hours, load, predicted, modes


def render_figures(doc: dict, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    hours, load, predicted, modes = _sector_mean_series(doc)
    if hours:
        fig, ax = plt.subplots(figsize=(9, 4))
        ax.plot(hours, load, label="observed load", color="tab:blue", lw=1.0)
        pred_pts = [(h, p) for h, p in zip(hours, predicted) if p is not None]
        if pred_pts:
            ax.plot(
                [h for h, _ in pred_pts],
                [p for _, p in pred_pts],
                label="predicted load",
                color="tab:orange",
                lw=1.0,
                ls="--",
            )
        ax.set_xlabel("time [h]")
        ax.set_ylabel("sector utilization")
        ax.set_ylim(0, 1)
        ax2 = ax.twinx()
        ax2.step(hours, modes, where="post", color="tab:green", lw=1.0, alpha=0.7)
        ax2.set_ylabel("awake capacity carriers (mean)")
        ax.legend(loc="upper left", fontsize=8)
        fig.tight_layout()
        path = out / "load_prediction_modes.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    fig, ax = plt.subplots(figsize=(5, 4))
    labels = ["baseline", "actual"]
    values = [
        doc["energy_baseline_capacity_j"] / 3.6e6,
        doc["energy_actual_capacity_j"] / 3.6e6,
    ]
    bars = ax.bar(labels, values, color=["tab:gray", "tab:green"])
    ax.bar_label(bars, fmt="%.1f")
    ax.set_ylabel("capacity-layer energy [kWh]")
    ax.set_title(f"savings: {doc['savings_capacity_pct']:.1f}%")
    fig.tight_layout()
    path = out / "energy_capacity.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    return written
