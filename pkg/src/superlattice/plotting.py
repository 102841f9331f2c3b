"""
Figure helpers for interference patterns and cross-sections.

Figures are written as vector files (SVG by default); the Agg backend is
forced so nothing needs a display.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .phasematch import idler_wavelength  # noqa: E402

FIGURE_FORMAT = "svg"


def publication_figure(width=6.0, height=None):
    """Figure and axes with readable font sizes; height defaults to the golden ratio."""
    if not height:
        height = width * (math.sqrt(5) - 1.0) / 2.0
    with plt.rc_context({"font.size": 10, "axes.labelsize": 11, "svg.hashsalt": "superlattice"}):
        fig, ax = plt.subplots(figsize=(width, height), facecolor="w")
    return fig, ax


def _save(fig, path):
    fig.tight_layout()
    # fixed metadata keeps the SVG text reproducible
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)
    return path


def plot_pattern(pattern, path, title: str = "", pump_wavelength: float | None = None):
    """Heatmap with signal wavelength on the abscissa and external angle on the ordinate."""
    fig, ax = publication_figure(6.0, 4.2)
    lam = pattern.signal_wavelengths * 1e9
    theta = np.rad2deg(pattern.external_angles)
    img = np.where(pattern.valid, pattern.intensity, np.nan).T
    mesh = ax.pcolormesh(lam, theta, img, shading="nearest", cmap="inferno", vmin=0.0, vmax=1.0,
                         rasterized=False)
    fig.colorbar(mesh, ax=ax, label="normalized intensity")
    ax.set_xlabel(r"$\lambda_s$ (nm)")
    ax.set_ylabel(r"$\theta_s$ (deg)")
    if pump_wavelength:
        def conjugate(x):
            # the map lam_s <-> lam_i is its own inverse
            with np.errstate(divide="ignore", invalid="ignore"):
                return idler_wavelength(pump_wavelength * 1e9, np.asarray(x, dtype=float))

        top = ax.secondary_xaxis("top", functions=(conjugate, conjugate))
        top.set_xlabel(r"$\lambda_i$ (nm)")
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_sections(sections: dict, path, title: str = ""):
    """Overlay of cross-sections; ``sections`` maps legend labels to CrossSection."""
    fig, ax = publication_figure(6.0)
    for label, sec in sections.items():
        ax.plot(np.rad2deg(sec.angles), sec.intensity, lw=1.0, label=str(label))
    ax.set_xlabel(r"$\theta_s$ (deg)")
    ax.set_ylabel("normalized intensity")
    ax.set_ylim(bottom=0.0)
    if len(sections) > 1:
        ax.legend(frameon=False, fontsize=8)
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_width_ratios(ratios, path, title: str = ""):
    fig, ax = publication_figure(4.5)
    n, r = zip(*ratios)
    ax.plot(n, r, "o-", label="model")
    ax.plot(n, np.asarray(n) / 2.0, "k--", lw=0.8, label="N / 2")
    ax.set_xlabel("number of crystals N")
    ax.set_ylabel(r"width ratio $w_2 / w_N$")
    ax.legend(frameon=False)
    if title:
        ax.set_title(title)
    return _save(fig, path)
