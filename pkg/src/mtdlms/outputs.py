"""CSV and image outputs of an experiment run.

``curves.csv`` columns: ``iteration, series_label, value_db, value_linear,
provenance``. Curves are decimated (every iteration up to 1000, then every
10th); summaries are always computed from the full curves. Numbers are
written with a fixed ``%.10e`` format so reruns produce identical bytes.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .curves import LearningCurve

CURVE_HEADER = ("iteration", "series_label", "value_db", "value_linear", "provenance")
SUMMARY_HEADER = ("series_label", "metric", "value")


def _fmt(x) -> str:
    x = float(x)
    if np.isnan(x):
        return "nan"
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.10e" % x


def write_curves(curves, path, decimate=True):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_HEADER)
        for c in curves:
            c = c.decimated() if decimate else c
            db = c.db
            for it, vdb, v in zip(c.iterations, db, c.values):
                w.writerow((int(it), c.series_label, _fmt(vdb), _fmt(v), c.provenance))


def read_curves(path) -> list[LearningCurve]:
    """Parse ``curves.csv`` back into curves (values are exact round trips)."""
    groups: dict = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["series_label"], row["provenance"])
            groups.setdefault(key, ([], []))
            groups[key][0].append(int(row["iteration"]))
            groups[key][1].append(float(row["value_linear"]))
    out = []
    for (series, prov), (it, v) in groups.items():
        label, ref, _ = series.split("|")
        out.append(LearningCurve(label, ref, np.array(it), np.array(v), prov))
    return out


def write_summary(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for series, metric, value in rows:
            w.writerow((series, metric, _fmt(value)))


def _plot_msd(curves, path):
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(11, 4), sharey=False)
    for ax, ref, title in zip(axes, ("w_o", "w_star"), ("w.r.t. w^o", "w.r.t. w*")):
        for c in curves:
            if c.reference != ref:
                continue
            style = "--" if c.provenance == "theory" else "-"
            ax.plot(c.iterations, c.db, style, lw=1, label=c.series_label)
        ax.set_xlabel("iteration")
        ax.set_ylabel("network MSD (dB)")
        ax.set_title(title)
        ax.grid(alpha=0.3)
        if ax.get_legend_handles_labels()[0]:
            ax.legend(fontsize=6)
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)


def _write_flows(arcs, oracle, est, outdir: Path, plots: bool):
    with open(outdir / "flows.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("arc", "tail", "head", "oracle", "estimate"))
        for j, ((t, h), o, e) in enumerate(zip(arcs, oracle, est)):
            w.writerow((j + 1, t + 1, h + 1, _fmt(o), _fmt(e)))
    if not plots:
        return
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 0.3 * len(arcs) + 1))
    ax.axis("off")
    cells = [[f"f{j + 1}", f"{t + 1}->{h + 1}", f"{o:.2f}", f"{e:.2f}"]
             for j, ((t, h), o, e) in enumerate(zip(arcs, oracle, est))]
    ax.table(cellText=cells, colLabels=["arc", "link", "oracle", "estimate"], loc="center")
    fig.savefig(outdir / "flows.png", dpi=110, metadata={"Software": None})
    plt.close(fig)


def _write_fields(true, est, ref, outdir: Path, plots: bool):
    n = true.shape[0]
    with open(outdir / "fields.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("k", "l", "true", "discrete_solution", "estimate"))
        for k in range(n):
            for l in range(n):
                w.writerow((k, l, _fmt(true[k, l]), _fmt(ref[k, l]), _fmt(est[k, l])))
    if not plots:
        return
    import matplotlib.pyplot as plt

    lo, hi = float(min(true.min(), est.min())), float(max(true.max(), est.max()))
    # one pixel per grid point; row index is y so the image reads as the unit square
    plt.imsave(outdir / "field_true.png", true.T[::-1], vmin=lo, vmax=hi, cmap="viridis")
    plt.imsave(outdir / "field_estimated.png", est.T[::-1], vmin=lo, vmax=hi, cmap="viridis")


def _plot_sweep(mus, zs, bs, path):
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    axes[0].semilogx(mus, 10 * np.log10(zs), "o-")
    axes[0].set_ylabel("steady-state MSD w.r.t. w* (dB)")
    axes[1].semilogx(mus, 10 * np.log10(bs), "o-")
    axes[1].set_ylabel("|bias|^2 (dB)")
    for ax in axes:
        ax.set_xlabel("step size")
        ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)


def emit_outputs(curves, summary, outdir, figures=None, plots=True):
    """Write ``curves.csv``, ``summary.csv`` and the figures into ``outdir``."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_curves(curves, outdir / "curves.csv")
    write_summary(summary, outdir / "summary.csv")
    figures = figures or {}
    if plots:
        import matplotlib

        matplotlib.use("Agg")
        if figures.get("msd") and curves:
            _plot_msd(curves, outdir / "msd.png")
        if "sweep" in figures:
            _plot_sweep(*figures["sweep"], outdir / "sweep.png")
    if "flows" in figures:
        _write_flows(*figures["flows"], outdir, plots)
    if "fields" in figures:
        _write_fields(*figures["fields"], outdir, plots)
