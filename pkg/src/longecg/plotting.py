"""SVG figures for reports.

Figures are written with a fixed hash salt and no date metadata so the
same data always produces the same file.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import DensityHeatmap  # noqa: E402

STYLE = {
    "svg.hashsalt": "longecg",
    "svg.fonttype": "path",
    "font.size": 8,
    "axes.labelsize": 8,
    "axes.titlesize": 9,
    "axes.linewidth": 0.6,
    "lines.linewidth": 1.0,
    "legend.fontsize": 7,
    "legend.frameon": False,
    "xtick.labelsize": 7,
    "ytick.labelsize": 7,
    "image.cmap": "RdBu_r",
}


def _save(fig, path):
    with plt.rc_context(STYLE):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _figure(w=6.0, h=3.2, **kw):
    with plt.rc_context(STYLE):
        return plt.subplots(figsize=(w, h), **kw)


def plot_heatmap(hm: DensityHeatmap, path, fs: int = 128):
    """Synthetic minus real amplitude density per timestep, on a symmetric scale."""
    fig, ax = _figure()
    with plt.rc_context(STYLE):
        lim = float(np.max(np.abs(hm.difference))) or 1.0
        t_end = hm.difference.shape[0] / fs
        im = ax.imshow(hm.difference.T, origin="lower", aspect="auto", vmin=-lim, vmax=lim,
                       extent=(0.0, t_end, hm.bin_edges[0], hm.bin_edges[-1]), interpolation="nearest")
        ax.set_xlabel("time in beat (s)")
        ax.set_ylabel("amplitude (mV)")
        fig.colorbar(im, ax=ax, label="density difference")
        fig.tight_layout()
    _save(fig, path)


def plot_overlay(real_beats, synth_beats, path, fs: int = 128, pre_r: int = None):
    """Mean beat with a one-sd band for both populations."""
    fig, ax = _figure()
    with plt.rc_context(STYLE):
        for beats, name, colour in ((real_beats, "real", "0.2"), (synth_beats, "synthetic", "tab:red")):
            b = np.asarray(beats, dtype=float)
            mu, sd = b.mean(axis=0), b.std(axis=0)
            t = np.arange(mu.size) / fs
            ax.plot(t, mu, color=colour, label=f"{name} mean")
            ax.fill_between(t, mu - sd, mu + sd, color=colour, alpha=0.2, linewidth=0)
        if pre_r is not None:
            ax.axvline(pre_r / fs, color="0.6", linewidth=0.5, linestyle=":")
        ax.set_xlabel("time in beat (s)")
        ax.set_ylabel("amplitude (mV)")
        ax.legend(loc="upper right")
        fig.tight_layout()
    _save(fig, path)


def plot_correlations(real_corr, synth_corr, schema, path):
    """Side-by-side feature correlation matrices."""
    fig, axes = _figure(7.0, 3.2, ncols=2)
    with plt.rc_context(STYLE):
        for ax, m, title in zip(axes, (real_corr, synth_corr), ("real", "synthetic")):
            im = ax.imshow(np.asarray(m), vmin=-1, vmax=1, interpolation="nearest")
            ax.set_title(title)
            ax.set_xticks(range(len(schema)), schema, rotation=90)
            ax.set_yticks(range(len(schema)), schema)
        fig.colorbar(im, ax=list(axes), shrink=0.8)
    _save(fig, path)


def plot_signal(signal, path, r_indices=None, seconds: float = 10.0):
    """The first ``seconds`` of a long-form signal, R-peaks marked."""
    fig, ax = _figure(7.0, 2.2)
    with plt.rc_context(STYLE):
        n = min(len(signal), int(seconds * signal.fs))
        t = np.arange(n) / signal.fs
        ax.plot(t, signal.samples[:n], color="0.15", linewidth=0.7)
        if r_indices is not None:
            r = np.asarray([i for i in r_indices if i < n], dtype=int)
            ax.plot(r / signal.fs, signal.samples[r], "o", color="tab:red", markersize=2)
        ax.set_xlabel("time (s)")
        ax.set_ylabel("mV")
        fig.tight_layout()
    _save(fig, path)
