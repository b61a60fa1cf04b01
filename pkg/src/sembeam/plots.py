"""Figure rendering for the report paths.

Every CSV the command line writes gets a PNG sibling from one of these
helpers.  Uses the Agg backend so headless runs work.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_metrics(report, path):
    """Top-K accuracy and throughput ratio, overall and per stratum."""
    ks = np.arange(1, report.kmax + 1)
    fig, (ax_a, ax_t) = plt.subplots(1, 2, figsize=(9, 3.6), sharex=True)
    for ax, overall, los, nlos, label in (
            (ax_a, report.accuracy, report.accuracy_los,
             report.accuracy_nlos, "top-K accuracy"),
            (ax_t, report.throughput, report.throughput_los,
             report.throughput_nlos, "throughput ratio")):
        ax.plot(ks, overall, "o-", label="all")
        if not np.all(np.isnan(los)):
            ax.plot(ks, los, "s--", label="LOS")
        if not np.all(np.isnan(nlos)):
            ax.plot(ks, nlos, "d--", label="NLOS")
        ax.set_xlabel("K")
        ax.set_ylabel(label)
        ax.set_ylim(0.0, 1.02)
        ax.grid(alpha=0.3)
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_pr(points, path):
    """Detection precision/recall across decision thresholds."""
    points = sorted(points)
    thresholds = [p[0] for p in points]
    fig, ax = plt.subplots(figsize=(5, 3.6))
    ax.plot(thresholds, [p[1] for p in points], "o-", label="precision")
    ax.plot(thresholds, [p[2] for p in points], "s--", label="recall")
    ax.set_xlabel("detection threshold")
    ax.set_ylim(0.0, 1.02)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_sweep(rows, path):
    """Top-1 metrics and scatterer count as the power cutoff moves."""
    thresholds = [row.threshold_db for row in rows]
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    ax.plot(thresholds, [row.accuracy1 for row in rows], "o-", label="A(1)")
    ax.plot(thresholds, [row.throughput1 for row in rows], "s--", label="T(1)")
    ax.set_xlabel("power threshold (dB)")
    ax.set_ylabel("top-1 metric")
    ax.set_ylim(0.0, 1.02)
    ax.grid(alpha=0.3)
    twin = ax.twinx()
    twin.plot(thresholds, [row.n_effective for row in rows], "^:", color="C2",
              label="N_E")
    twin.set_ylabel("mean effective scatterers per camera")
    lines, labels = ax.get_legend_handles_labels()
    lines2, labels2 = twin.get_legend_handles_labels()
    ax.legend(lines + lines2, labels + labels2, fontsize=8, loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_trace(trace, path):
    """Loss and top-1 curves over epochs, one line per split."""
    splits = sorted({row["split"] for row in trace})
    fig, (ax_l, ax_a) = plt.subplots(1, 2, figsize=(9, 3.6))
    for split in splits:
        rows = [r for r in trace if r["split"] == split]
        epochs = [r["epoch"] for r in rows]
        ax_l.plot(epochs, [r["loss"] for r in rows], label=split)
        ax_a.plot(epochs, [r["top1"] for r in rows], label=split)
    ax_l.set_xlabel("epoch")
    ax_l.set_ylabel("loss")
    ax_l.grid(alpha=0.3)
    ax_l.legend(fontsize=8)
    ax_a.set_xlabel("epoch")
    ax_a.set_ylabel("top-1 accuracy")
    ax_a.set_ylim(0.0, 1.02)
    ax_a.grid(alpha=0.3)
    ax_a.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
