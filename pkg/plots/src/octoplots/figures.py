"""The three figure kinds: queuing-delay time series, latency-vs-quality
scatter, and age-of-information bars.

Rendering is deterministic: inputs are processed in argument order,
schemes keep a fixed marker/color map, and rows are sorted before
plotting.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from octoplots.schema import (  # noqa: E402
    QUEUE_COLUMNS,
    SUMMARY_COLUMNS,
    as_float,
    read_csv,
)

# fixed scheme -> (marker, color) map so figures are comparable across runs
SCHEME_STYLE = {
    "octopus": ("o", "tab:blue"),
    "octobbr": ("s", "tab:orange"),
    "pdrop": ("^", "tab:green"),
    "droptail": ("v", "tab:red"),
    "oracle": ("*", "tab:purple"),
    "stale-oracle": ("P", "tab:brown"),
}
FALLBACK_STYLE = ("x", "tab:gray")


def _save(fig, out_path: str) -> None:
    d = os.path.dirname(out_path)
    if d:
        os.makedirs(d, exist_ok=True)
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def _label_for(path: str) -> str:
    parent = os.path.basename(os.path.dirname(os.path.abspath(path)))
    return parent or os.path.basename(path)


def render_timeseries(queue_csvs: list[str], out_path: str,
                      band_ms: float = 30.0) -> None:
    """Queuing delay over time, one line per input queue.csv, with a
    horizontal reference band at band_ms."""
    fig, ax = plt.subplots(figsize=(8, 3.2))
    for path in queue_csvs:
        rows = read_csv(path, QUEUE_COLUMNS)
        xs = [as_float(r, "t_ms") / 1000 for r in rows]
        ys = [as_float(r, "qdelay_ms") for r in rows]
        ax.plot(xs, ys, linewidth=1.0, label=_label_for(path))
    if band_ms > 0:
        ax.axhline(band_ms, linestyle="--", color="black", linewidth=0.8,
                   label=f"{band_ms:g} ms")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("queuing delay (ms)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, out_path)


def render_scatter(summary_csv: str, out_path: str) -> None:
    """p99 frame latency vs mean quality, one marker per summary row."""
    rows = read_csv(summary_csv, SUMMARY_COLUMNS)
    fig, ax = plt.subplots(figsize=(5, 4))
    seen = set()
    for row in sorted(rows, key=lambda r: (r["scheme"], r["scenario"])):
        marker, color = SCHEME_STYLE.get(row["scheme"], FALLBACK_STYLE)
        label = row["scheme"] if row["scheme"] not in seen else None
        seen.add(row["scheme"])
        ax.scatter(as_float(row, "lat_p99_ms"), as_float(row, "quality_mean"),
                   marker=marker, color=color, s=60, label=label)
    ax.set_xlabel("p99 frame latency (ms)")
    ax.set_ylabel("mean quality score")
    ax.set_xscale("log")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, out_path)


def render_bars(summary_csv: str, out_path: str) -> None:
    """Age-of-information medians and p99s, grouped per summary row."""
    rows = read_csv(summary_csv, SUMMARY_COLUMNS)
    rows = sorted(rows, key=lambda r: (r["scenario"], r["scheme"]))
    labels = [f"{r['scenario']}\n{r['scheme']}" for r in rows]
    p50 = [as_float(r, "aoi_p50_ms") for r in rows]
    p99 = [as_float(r, "aoi_p99_ms") for r in rows]
    xs = range(len(rows))
    width = 0.38
    fig, ax = plt.subplots(figsize=(max(5, 1.2 * len(rows)), 4))
    ax.bar([x - width / 2 for x in xs], p50, width, label="AoI p50",
           color="tab:blue")
    ax.bar([x + width / 2 for x in xs], p99, width, label="AoI p99",
           color="tab:orange")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels, fontsize=7)
    ax.set_ylabel("age of information (ms)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, out_path)
