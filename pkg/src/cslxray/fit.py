"""Amplitude fits of the alpha/E spectral shape to binned counts.

The expected number of counts in a bin [lo, hi] is ``alpha * ln(hi/lo)``, so
``alpha`` is in counts (integrated over the spectrum's full exposure). Both
estimators are closed form; :func:`fit_alpha_poisson_numeric` is kept only as
an independent cross-check.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import xlogy

from cslxray.physics import DomainError
from cslxray.spectrum import BinnedSpectrum, neyman_sigma

METHODS = ("wls", "poisson_mle")


class DegenerateFitError(RuntimeError):
    """The data cannot constrain the amplitude (no counts, too few bins)."""


@dataclass(frozen=True)
class FitResult:
    alpha_hat: float
    alpha_err: float
    chi2: float
    ndf: int
    method: str
    window: tuple[float, float]

    def __post_init__(self):
        if not self.alpha_err > 0:
            raise ValueError("alpha_err must be > 0")
        if self.ndf < 1:
            raise ValueError("ndf must be >= 1")
        if self.chi2 < 0:
            raise ValueError("chi2 must be >= 0")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")

    @property
    def chi2_per_ndf(self) -> float:
        return goodness(self)

    def to_dict(self) -> dict:
        d = asdict(self)
        del d["window"]
        d["chi2_per_ndf"] = self.chi2_per_ndf
        d["window_kev"] = list(self.window)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> FitResult:
        lo, hi = d["window_kev"]
        return cls(
            alpha_hat=float(d["alpha_hat"]),
            alpha_err=float(d["alpha_err"]),
            chi2=float(d["chi2"]),
            ndf=int(d["ndf"]),
            method=d["method"],
            window=(float(lo), float(hi)),
        )


def log_widths(e_lo, e_hi) -> np.ndarray:
    lo = np.asarray(e_lo, dtype=float)
    hi = np.asarray(e_hi, dtype=float)
    if np.any(~(lo > 0)) or np.any(~(hi > lo)):
        raise DomainError("bin edges must satisfy 0 < e_lo < e_hi")
    return np.log(hi / lo)


def expected_counts(alpha, e_lo, e_hi):
    """Integral of alpha/E over [e_lo, e_hi]."""
    mu = np.asarray(alpha, dtype=float) * log_widths(e_lo, e_hi)
    return float(mu) if mu.ndim == 0 else mu


def wls_chi2(alpha, x, y, w):
    """Weighted chi^2 for one or many trial amplitudes."""
    a = np.asarray(alpha, dtype=float)[..., None]
    return np.sum(w * (y - a * x) ** 2, axis=-1)


def fit_alpha_wls(s: BinnedSpectrum) -> FitResult:
    """Neyman-weighted least squares with sigma_i = max(sqrt(n_i), 1)."""
    if s.n_bins < 2:
        raise DegenerateFitError("least-squares fit needs at least 2 bins")
    y = s.counts_per_bin()
    if not np.any(y > 0):
        raise DegenerateFitError("all bins are empty")
    x = log_widths(s.e_lo, s.e_hi)
    w = 1.0 / neyman_sigma(y) ** 2
    sxx = np.sum(w * x * x)
    alpha = float(np.sum(w * x * y) / sxx)
    chi2 = float(wls_chi2(alpha, x, y, w))
    return FitResult(alpha, float(1.0 / math.sqrt(sxx)), max(chi2, 0.0), s.n_bins - 1, "wls", s.window)


def poisson_deviance(alpha, x, y):
    """-2 ln(L(alpha)/L_saturated) for Poisson bins with means alpha*x."""
    mu = np.asarray(alpha, dtype=float)[..., None] * x
    return 2.0 * np.sum(xlogy(y, y) - xlogy(y, mu) - (y - mu), axis=-1)


def fit_alpha_poisson(s: BinnedSpectrum) -> FitResult:
    """Binned Poisson maximum likelihood.

    For a single-shape model the likelihood equation gives
    alpha = N / sum(x_i); for contiguous bins sum(x_i) = ln(E_max/E_min).
    The uncertainty alpha/sqrt(N) is the inverse Fisher information at the
    optimum. A single bin has no shape information, so ``ndf`` is reported as
    1 there with chi2 = 0.
    """
    y = s.counts_per_bin()
    n_total = float(y.sum())
    if not n_total > 0:
        raise DegenerateFitError("zero total counts")
    x = log_widths(s.e_lo, s.e_hi)
    alpha = n_total / float(x.sum())
    chi2 = float(poisson_deviance(alpha, x, y))
    return FitResult(alpha, alpha / math.sqrt(n_total), max(chi2, 0.0), max(s.n_bins - 1, 1), "poisson_mle", s.window)


def fit_alpha_poisson_numeric(s: BinnedSpectrum, rtol: float = 1e-10) -> float:
    """Iterative Poisson maximizer, used to check the closed form."""
    y = s.counts_per_bin()
    if not y.sum() > 0:
        raise DegenerateFitError("zero total counts")
    x = log_widths(s.e_lo, s.e_hi)

    # optimize over log(alpha) to keep the step scale-free
    def nll(t):
        mu = math.exp(t) * x
        return float(np.sum(mu - xlogy(y, mu)))

    # nll is convex in log(alpha); start from the per-bin ratios, never the closed form
    ratios = y[y > 0] / x[y > 0]
    t0 = math.log(float(np.median(ratios)))
    res = minimize_scalar(nll, bracket=(t0 - 1.0, t0 + 1.0), method="brent", options={"xtol": rtol})
    return math.exp(res.x)


def fit_alpha(s: BinnedSpectrum, method: str = "wls") -> FitResult:
    if method == "wls":
        return fit_alpha_wls(s)
    if method == "poisson_mle":
        return fit_alpha_poisson(s)
    raise ValueError(f"unknown fit method {method!r}; choose from {METHODS}")


def goodness(f: FitResult) -> float:
    """Reduced chi-square."""
    return f.chi2 / f.ndf
