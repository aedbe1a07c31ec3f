"""Upper limits on the CSL collapse rate from binned low-background X-ray spectra."""

from cslxray.physics import (
    EmissionModelParams,
    PhysicalConstants,
    mass_prop_factor,
    per_electron_coefficient,
    rate_density,
)
from cslxray.spectrum import (
    GERMANIUM,
    BinnedSpectrum,
    MaterialSpec,
    load_spectrum,
    restrict_range,
    save_spectrum,
    to_rate_density,
)
from cslxray.fit import (
    FitResult,
    expected_counts,
    fit_alpha,
    fit_alpha_poisson,
    fit_alpha_wls,
    goodness,
)
from cslxray.limits import (
    LimitAssumptions,
    LimitResult,
    alpha_to_lambda,
    compare_models,
    factor_c,
    fu_reference,
    quasi_free_count,
)
from cslxray.pseudo import (
    ClosureReport,
    SimulationConfig,
    closure_study,
    sample_energy,
    simulate_spectrum,
)

__version__ = "0.1.0"

__all__ = [
    "BinnedSpectrum",
    "ClosureReport",
    "EmissionModelParams",
    "FitResult",
    "GERMANIUM",
    "LimitAssumptions",
    "LimitResult",
    "MaterialSpec",
    "PhysicalConstants",
    "SimulationConfig",
    "alpha_to_lambda",
    "closure_study",
    "compare_models",
    "expected_counts",
    "factor_c",
    "fit_alpha",
    "fit_alpha_poisson",
    "fit_alpha_wls",
    "fu_reference",
    "goodness",
    "load_spectrum",
    "mass_prop_factor",
    "per_electron_coefficient",
    "quasi_free_count",
    "rate_density",
    "restrict_range",
    "sample_energy",
    "save_spectrum",
    "simulate_spectrum",
    "to_rate_density",
]
