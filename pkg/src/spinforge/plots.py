"""SVG figure rendering for the command-line workflows.

All figures are written as SVG with a fixed hash salt and no embedded
timestamp, so rerunning a command reproduces byte-identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .dipolar import ProbabilityMap
from .fields import Spectrum

matplotlib.rcParams["svg.hashsalt"] = "spinforge"


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_spectrum(
    spectrum: Spectrum,
    path,
    overlay: Spectrum | None = None,
    title: str = "",
    xlabel: str = "frequency (MHz)",
) -> None:
    """One spectrum, optionally overlaid with a second for comparison."""
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.plot(
        spectrum.frequencies, spectrum.amplitudes, lw=1.0, label="measured"
    )
    if overlay is not None:
        ax.plot(
            overlay.frequencies,
            overlay.amplitudes,
            lw=1.0,
            ls="--",
            label="model",
        )
        ax.legend(frameon=False, fontsize=8)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("amplitude")
    if title:
        ax.set_title(title, fontsize=10)
    fig.tight_layout()
    _save(fig, path)


def plot_fit_overlay(
    x: np.ndarray,
    measured: np.ndarray,
    sigmas: np.ndarray,
    modeled: np.ndarray,
    path,
    xlabel: str = "observation",
    ylabel: str = "value",
) -> None:
    """Measured points with error bars against model predictions."""
    x = np.asarray(x, dtype=float)
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.errorbar(
        x,
        measured,
        yerr=sigmas,
        fmt="o",
        ms=3.5,
        lw=0.8,
        capsize=2,
        label="data",
    )
    order = np.argsort(x)
    ax.plot(x[order], np.asarray(modeled)[order], lw=1.0, label="model")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def plot_map_slices(pmap: ProbabilityMap, path) -> None:
    """Three orthogonal slices of the location map through its argmax."""
    i, j, k = np.unravel_index(np.argmax(pmap.values), pmap.values.shape)
    lo, hi = pmap.axis[0], pmap.axis[-1]
    extent = (lo, hi, lo, hi)
    panels = (
        (pmap.values[:, :, k].T, "x (nm)", "y (nm)"),
        (pmap.values[:, j, :].T, "x (nm)", "z (nm)"),
        (pmap.values[i, :, :].T, "y (nm)", "z (nm)"),
    )
    fig, axes = plt.subplots(1, 3, figsize=(9.6, 3.2))
    for ax, (img, xl, yl) in zip(axes, panels):
        ax.imshow(
            img, origin="lower", extent=extent, cmap="viridis", aspect="auto"
        )
        ax.set_xlabel(xl)
        ax.set_ylabel(yl)
    fig.tight_layout()
    _save(fig, path)


def plot_phase_cycle(
    signal: np.ndarray, amplitudes: np.ndarray, path
) -> None:
    """Difference signal vs repetition plus its rate decomposition."""
    signal = np.asarray(signal, dtype=float)
    amplitudes = np.asarray(amplitudes, dtype=float)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.4, 3.2))
    ax1.plot(np.arange(signal.size), signal, "o-", ms=3, lw=0.8)
    ax1.set_xlabel("repetition n")
    ax1.set_ylabel("difference signal")
    ax2.stem(np.arange(amplitudes.size), amplitudes, basefmt=" ")
    ax2.set_xlabel("rate index i (omega = i pi/10)")
    ax2.set_ylabel("amplitude")
    fig.tight_layout()
    _save(fig, path)
