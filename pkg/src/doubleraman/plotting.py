"""Minimal, deterministic SVG figures for the command-line reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# Fixed hash salt and no date stamp: identical inputs give identical files.
SVG_RC = {"svg.hashsalt": "doubleraman", "svg.fonttype": "none"}
SVG_METADATA = {"Date": None, "Creator": None}


def _save(fig, path, provenance=None):
    meta = dict(SVG_METADATA)
    if provenance:
        meta["Description"] = provenance
    fig.savefig(path, format="svg", metadata=meta)
    plt.close(fig)


def plot_efficiency_map(emap, path, *, optimum_us=None, title=None, provenance=None):
    """Heat map of efficiency over (duration, width) with the optimum dashed."""
    with plt.rc_context(SVG_RC):
        fig, ax = plt.subplots(figsize=(6.0, 4.2))
        mesh = ax.pcolormesh(emap.durations_us, emap.widths, emap.values.T, shading="nearest",
                             vmin=0.0, vmax=1.0, cmap="viridis")
        fig.colorbar(mesh, ax=ax, label="efficiency")
        if optimum_us is not None:
            ax.axvline(optimum_us, color="tab:red", ls="--", lw=1.2,
                       label=f"optimum {optimum_us:.2f} us")
            ax.legend(loc="upper right", fontsize=8)
        if np.all(emap.durations_us > 0) and emap.durations_us.max() / emap.durations_us.min() > 5:
            ax.set_xscale("log")
        ax.set_xlabel("pulse duration [us]")
        ax.set_ylabel("momentum width [hbar K]")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        _save(fig, path, provenance)


def plot_curves(widths, curves, path, *, ylabel="efficiency", title=None, provenance=None,
                styles=None):
    """Line plot of several per-width curves given as ``{label: values}``."""
    styles = styles or {}
    with plt.rc_context(SVG_RC):
        fig, ax = plt.subplots(figsize=(5.5, 3.8))
        for label, values in curves.items():
            ax.plot(widths, values, styles.get(label, "-"), label=label, lw=1.4)
        ax.set_xlabel("momentum width [hbar K]")
        ax.set_ylabel(ylabel)
        ax.legend(fontsize=8)
        if title:
            ax.set_title(title)
        fig.tight_layout()
        _save(fig, path, provenance)


def plot_fringes(signals, path, *, title=None, provenance=None):
    """Interference fringes ``I(dphi)`` for several labelled signals."""
    with plt.rc_context(SVG_RC):
        fig, ax = plt.subplots(figsize=(5.5, 3.8))
        for label, sig in signals.items():
            ax.plot(sig.phases, sig.intensities, "-",
                    label=f"{label}: A={sig.amplitude:.3f}, C={sig.contrast:.3f}")
        ax.set_xlabel("phase shift [rad]")
        ax.set_ylabel("exit-port population")
        ax.set_ylim(bottom=0.0)
        ax.legend(fontsize=8)
        if title:
            ax.set_title(title)
        fig.tight_layout()
        _save(fig, path, provenance)


def plot_parameter_maps(durations_us, widths, maps, path, *, provenance=None):
    """Side-by-side heat maps, e.g. amplitude and contrast or alpha and beta."""
    with plt.rc_context(SVG_RC):
        fig, axes = plt.subplots(1, len(maps), figsize=(5.0 * len(maps), 4.0), squeeze=False)
        for ax, (label, values) in zip(axes[0], maps.items()):
            mesh = ax.pcolormesh(durations_us, widths, np.asarray(values).T, shading="nearest",
                                 cmap="viridis")
            fig.colorbar(mesh, ax=ax, label=label)
            ax.set_xlabel("pulse duration [us]")
            ax.set_ylabel("momentum width [hbar K]")
        fig.tight_layout()
        _save(fig, path, provenance)
