"""Static SVG of a fitted spectrum: data with Poisson errors and the alpha/E curve."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from cslxray.fit import FitResult  # noqa: E402
from cslxray.spectrum import BinnedSpectrum, neyman_sigma  # noqa: E402


def plot_fit(s: BinnedSpectrum, fit: FitResult, path: str | Path, title: str | None = None) -> Path:
    """Counts/keV per bin against energy on log-log axes, with the fitted curve."""
    counts = s.counts_per_bin()
    widths = s.widths
    centers = np.sqrt(s.e_lo * s.e_hi)
    density = counts / widths
    err = np.where(counts > 0, np.sqrt(counts), neyman_sigma(counts)) / widths

    fig, ax = plt.subplots(figsize=(5.5, 5.5))
    nz = counts > 0
    ax.errorbar(centers[nz], density[nz], yerr=np.minimum(err[nz], density[nz] * 0.999), xerr=None,
                fmt="o", ms=3, color="k", label="data")
    e = np.geomspace(s.bin_edges[0], s.bin_edges[-1], 200)
    ax.plot(e, fit.alpha_hat / e, color="tab:red",
            label=rf"$\alpha/E$, $\alpha$ = {fit.alpha_hat:.1f} $\pm$ {fit.alpha_err:.1f}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("Energy [keV]")
    ax.set_ylabel("Counts / keV")
    ax.set_title(title or f"{fit.method}: $\\chi^2$/ndf = {fit.chi2_per_ndf:.2f}")
    ax.legend(frameon=False)
    fig.tight_layout()

    path = Path(path)
    with plt.rc_context({"svg.hashsalt": "cslxray"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
