"""Pseudo-experiments: synthetic 1/E spectra and closure/coverage studies.

Every trial draws from its own ``PCG64`` stream seeded with
``SeedSequence(seed, spawn_key=(trial,))``, so results do not depend on the
order or concurrency in which trials run.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from cslxray.fit import METHODS, DegenerateFitError, expected_counts, fit_alpha
from cslxray.limits import LimitAssumptions, alpha_to_lambda, implied_alpha
from cslxray.physics import DomainError, PhysicalConstants
from cslxray.spectrum import GERMANIUM, BinnedSpectrum, MaterialSpec

RNG_ALGORITHM = "numpy.random.PCG64;SeedSequence(seed,spawn_key=(trial,))"
SAMPLING_MODES = ("binned", "events")

DEFAULT_WINDOW = (4.5, 48.5)


def default_edges(e_lo: float = DEFAULT_WINDOW[0], e_hi: float = DEFAULT_WINDOW[1], width: float = 1.0) -> np.ndarray:
    n = int(round((e_hi - e_lo) / width))
    return e_lo + width * np.arange(n + 1)


def sample_energy(u, e_lo: float, e_hi: float):
    """Inverse CDF of the 1/E density on [e_lo, e_hi]: e_lo * (e_hi/e_lo)**u."""
    if not 0 < e_lo < e_hi:
        raise DomainError("need 0 < e_lo < e_hi")
    u = np.asarray(u, dtype=float)
    if np.any(~((u >= 0) & (u <= 1))):
        raise DomainError("u must lie in [0, 1]")
    e = e_lo * (e_hi / e_lo) ** u
    # pin the endpoints against rounding in the power
    e = np.clip(e, e_lo, e_hi)
    return float(e) if e.ndim == 0 else e


def one_over_e_cdf(e, e_lo: float, e_hi: float):
    return np.log(np.asarray(e, dtype=float) / e_lo) / math.log(e_hi / e_lo)


@dataclass(frozen=True, eq=False)
class SimulationConfig:
    lambda_true: float
    bin_edges: np.ndarray = field(default_factory=default_edges)
    exposure: float = 80.0
    background_rate: float = 0.0
    assumptions: LimitAssumptions = LimitAssumptions()
    material: MaterialSpec = GERMANIUM
    constants: PhysicalConstants = PhysicalConstants()
    seed: int = 0
    fit_method: str = "poisson_mle"
    sampling: str = "binned"

    def __post_init__(self):
        edges = np.array(self.bin_edges, dtype=float)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0) or not edges[0] > 0:
            raise ValueError("binning must be >= 2 strictly increasing positive edges")
        if not (math.isfinite(self.lambda_true) and self.lambda_true >= 0):
            raise ValueError("lambda_true must be >= 0")
        if not (math.isfinite(self.background_rate) and self.background_rate >= 0):
            raise ValueError("background_rate must be >= 0")
        if not self.exposure > 0:
            raise ValueError("exposure must be > 0")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.fit_method not in METHODS:
            raise ValueError(f"fit_method must be one of {METHODS}")
        if self.sampling not in SAMPLING_MODES:
            raise ValueError(f"sampling must be one of {SAMPLING_MODES}")
        edges.flags.writeable = False
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "seed", int(self.seed))
        if self.assumptions.exposure != self.exposure:
            object.__setattr__(self, "assumptions", replace(self.assumptions, exposure=float(self.exposure)))

    @classmethod
    def for_alpha(cls, alpha: float, **kwargs) -> SimulationConfig:
        """Config whose signal amplitude (counts over the full exposure) is ``alpha``."""
        probe = cls(lambda_true=1.0, **kwargs)
        lam = alpha / implied_alpha(1.0, probe.assumptions, material=probe.material, constants=probe.constants)
        return replace(probe, lambda_true=lam)

    @property
    def alpha_true(self) -> float:
        return implied_alpha(self.lambda_true, self.assumptions, material=self.material, constants=self.constants)

    def expected_bin_means(self) -> np.ndarray:
        e = self.bin_edges
        signal = expected_counts(self.alpha_true, e[:-1], e[1:])
        return signal + self.background_rate * np.diff(e) * self.exposure

    def rng(self, trial: int = 0) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=(trial,))))

    def to_dict(self) -> dict:
        return {
            "lambda_true_per_s": self.lambda_true,
            "alpha_true": self.alpha_true,
            "bin_edges_kev": self.bin_edges.tolist(),
            "exposure_kg_day": self.exposure,
            "background_rate": self.background_rate,
            "assumptions": asdict(self.assumptions),
            "material": self.material.name,
            "atoms_per_kg": self.material.atoms_per_kg,
            "constants": self.constants.to_config(),
            "seed": self.seed,
            "fit_method": self.fit_method,
            "sampling": self.sampling,
            "rng": RNG_ALGORITHM,
        }


def _sample_events(cfg: SimulationConfig, rng: np.random.Generator) -> np.ndarray:
    e = cfg.bin_edges
    lo, hi = float(e[0]), float(e[-1])
    n_sig = rng.poisson(cfg.alpha_true * math.log(hi / lo))
    n_bkg = rng.poisson(cfg.background_rate * (hi - lo) * cfg.exposure)
    energies = np.concatenate([sample_energy(rng.random(n_sig), lo, hi), rng.uniform(lo, hi, n_bkg)])
    counts, _ = np.histogram(energies, bins=e)
    return counts


def simulate_spectrum(cfg: SimulationConfig, trial: int = 0) -> BinnedSpectrum:
    """Poisson pseudo-data for one trial; identical for identical (cfg, trial)."""
    rng = cfg.rng(trial)
    if cfg.sampling == "events":
        counts = _sample_events(cfg, rng)
    else:
        counts = rng.poisson(cfg.expected_bin_means())
    meta = {"synthetic": True, "seed": cfg.seed, "trial": trial, "rng": RNG_ALGORITHM}
    return BinnedSpectrum(cfg.bin_edges, counts.astype(float), cfg.exposure, "counts_per_bin", meta)


@dataclass(frozen=True)
class TrialOutcome:
    trial: int
    alpha_hat: float = math.nan
    alpha_err: float = math.nan
    chi2_per_ndf: float = math.nan
    lambda_hat: float = math.nan
    lambda_upper: float = math.nan
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def run_trial(cfg: SimulationConfig, trial: int) -> TrialOutcome:
    s = simulate_spectrum(cfg, trial)
    try:
        f = fit_alpha(s, cfg.fit_method)
        point = alpha_to_lambda(
            f, replace(cfg.assumptions, cl_mode="point_estimate"), material=cfg.material, constants=cfg.constants
        )
        upper = alpha_to_lambda(f, cfg.assumptions, material=cfg.material, constants=cfg.constants)
    except DegenerateFitError as exc:
        return TrialOutcome(trial, error=str(exc))
    return TrialOutcome(trial, f.alpha_hat, f.alpha_err, f.chi2_per_ndf, point.lambda_upper, upper.lambda_upper)


def _stat(fn, x):
    return float(fn(x)) if x.size else None


@dataclass(frozen=True)
class ClosureReport:
    n_trials: int
    n_failed: int
    lambda_true: float
    alpha_true: float
    mean_alpha: float | None
    median_alpha: float | None
    mean_lambda: float | None
    median_lambda: float | None
    mean_lambda_upper: float | None
    pull_mean: float | None
    pull_std: float | None
    mean_chi2_per_ndf: float | None
    coverage: float | None
    cl_mode: str
    config: dict
    failures: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.coverage is not None and not 0.0 <= self.coverage <= 1.0:
            raise ValueError("coverage must lie in [0, 1]")

    @property
    def coverage_defined(self) -> bool:
        return self.coverage is not None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["coverage_defined"] = self.coverage_defined
        return d


def summarize(cfg: SimulationConfig, outcomes: list[TrialOutcome]) -> ClosureReport:
    good = [o for o in outcomes if o.ok]
    alpha = np.array([o.alpha_hat for o in good])
    err = np.array([o.alpha_err for o in good])
    lam = np.array([o.lambda_hat for o in good])
    upper = np.array([o.lambda_upper for o in good])
    chi2 = np.array([o.chi2_per_ndf for o in good])
    alpha_true = cfg.alpha_true
    pulls = (alpha - alpha_true) / err
    failures: dict[str, int] = {}
    for o in outcomes:
        if not o.ok:
            failures[o.error] = failures.get(o.error, 0) + 1
    return ClosureReport(
        n_trials=len(outcomes),
        n_failed=len(outcomes) - len(good),
        lambda_true=cfg.lambda_true,
        alpha_true=alpha_true,
        mean_alpha=_stat(np.mean, alpha),
        median_alpha=_stat(np.median, alpha),
        mean_lambda=_stat(np.mean, lam),
        median_lambda=_stat(np.median, lam),
        mean_lambda_upper=_stat(np.mean, upper),
        pull_mean=_stat(np.mean, pulls),
        pull_std=_stat(lambda p: np.std(p, ddof=1), pulls) if pulls.size > 1 else None,
        mean_chi2_per_ndf=_stat(np.mean, chi2),
        coverage=_stat(lambda u: np.mean(u >= cfg.lambda_true), upper),
        cl_mode=cfg.assumptions.cl_mode,
        config=cfg.to_dict(),
        failures=failures,
    )


def run_trials(cfg: SimulationConfig, n_trials: int, workers: int = 1) -> list[TrialOutcome]:
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda t: run_trial(cfg, t), range(n_trials)))
    return [run_trial(cfg, t) for t in range(n_trials)]


def closure_study(cfg: SimulationConfig, n_trials: int, workers: int = 1) -> ClosureReport:
    """Simulate, fit and set a limit ``n_trials`` times and summarize.

    Degenerate fits are counted in ``n_failed`` and excluded from the
    statistics; ``coverage`` is None when no trial succeeded.
    """
    return summarize(cfg, run_trials(cfg, n_trials, workers))


def write_trials_csv(outcomes: list[TrialOutcome], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "alpha_hat", "lambda_upper"])
        for o in outcomes:
            w.writerow([o.trial, repr(o.alpha_hat), repr(o.lambda_upper)])
