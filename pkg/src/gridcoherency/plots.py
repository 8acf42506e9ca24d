"""Figures written next to the CSV reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# strip the matplotlib version so reruns produce identical files
_META = {"Software": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)


def plot_index_series(rows, path, fault_times=()):
    t = np.array([r.t_start for r in rows], dtype=float)
    gci = np.array([np.nan if r.gci is None else r.gci for r in rows], dtype=float)
    gsi = np.array([np.nan if r.gsi is None else r.gsi for r in rows], dtype=float)
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(6.4, 4.8))
    ax1.plot(t, gci, marker="o", ms=3, color="tab:blue")
    ax1.set_ylabel("GCI")
    ax2.plot(t, gsi, marker="o", ms=3, color="tab:red")
    ax2.set_ylabel("GSI")
    ax2.set_xlabel("window start (s)")
    for ax in (ax1, ax2):
        ax.set_ylim(-0.05, 1.05)
        ax.grid(alpha=0.3)
        for tf in fault_times:
            ax.axvline(tf, color="0.5", ls="--", lw=0.8)
    _save(fig, path)


def plot_similarity(S, path, labels=None):
    order = np.arange(S.n_buses)
    if labels is not None:
        order = np.argsort(np.asarray(labels), kind="stable")
    vals = np.asarray(S.values)[np.ix_(order, order)]
    names = [S.bus_ids[i] for i in order]
    fig, ax = plt.subplots(figsize=(5.6, 4.8))
    im = ax.imshow(vals, vmin=0.0, vmax=1.0, cmap="viridis")
    fig.colorbar(im, ax=ax, label="similarity")
    if len(names) <= 40:
        ax.set_xticks(range(len(names)), names, rotation=90, fontsize=7)
        ax.set_yticks(range(len(names)), names, fontsize=7)
    _save(fig, path)


def plot_angles(traces, path):
    t = traces.meta.times()
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    for bus, row in zip(traces.bus_ids, traces.angles):
        ax.plot(t, row, lw=0.8, label=bus)
    ax.set_xlabel("t (s)")
    ax.set_ylabel("angle (rad)")
    if traces.n_buses <= 12:
        ax.legend(fontsize=7, ncol=3)
    ax.grid(alpha=0.3)
    _save(fig, path)
