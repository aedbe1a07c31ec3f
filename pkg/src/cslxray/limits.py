"""Conversion of a fitted spectral amplitude into an upper bound on lambda.

With ``K`` the per-electron coefficient, the detector sees

    dN/dE = K * lambda / E * c * exposure      [counts / keV]

where ``c = atoms_per_kg * seconds_per_day * n_quasi_free``. Requiring this
not to exceed the observed ``alpha / E`` gives ``lambda <= alpha / (K c exposure)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from cslxray.fit import FitResult
from cslxray.physics import (
    PAPER_SECONDS_PER_DAY,
    DomainError,
    PhysicalConstants,
    mass_prop_factor,
    per_electron_coefficient,
)
from cslxray.spectrum import GERMANIUM, MaterialSpec

CONSTANTS_MODES = ("exact", "paper_compat")
CL_MODES = {"point_estimate": 0.0, "plus_1sigma": 1.0, "plus_1p645sigma": 1.645}

LAMBDA_QMSL = 1e-16
LAMBDA_CSL = 2.2e-17

# name, value [s^-1]
MODEL_VALUES = (
    ("lambda_QMSL", LAMBDA_QMSL),
    ("lambda_CSL", LAMBDA_CSL),
)

# Published upper bounds, in orders of magnitude above lambda_CSL. A pair is
# a quoted range and is kept as printed.
TABLE1_BOUNDS = (
    ("Fullerene diffraction experiments", "laboratory", (12, 13)),
    ("Decay of supercurrents (SQUIDs)", "laboratory", 15),
    ("Spontaneous X-ray emission from Ge", "laboratory", 5),
    ("Proton decay", "laboratory", 19),
    ("Dissociation of cosmic hydrogen", "astronomical", 18),
    ("Heating of intergalactic medium (IGM)", "astronomical", 9),
    ("Heating of protons in the universe", "astronomical", 13),
    ("Heating of interstellar dust grains", "astronomical", 16),
)

FU_LIMIT = 0.55e-16

# |log10 distance| below this counts as sitting on the boundary
BOUNDARY_ATOL = 1e-12


@dataclass(frozen=True)
class LimitAssumptions:
    n_quasi_free: int = 4
    mass_proportional: bool = False
    constants_mode: str = "paper_compat"
    cl_mode: str = "point_estimate"
    exposure: float = 80.0

    def __post_init__(self):
        if not (isinstance(self.n_quasi_free, int) and self.n_quasi_free > 0):
            raise ValueError(f"n_quasi_free must be a positive integer, got {self.n_quasi_free!r}")
        if not (math.isfinite(self.exposure) and self.exposure > 0):
            raise ValueError(f"exposure must be > 0, got {self.exposure!r}")
        if self.constants_mode not in CONSTANTS_MODES:
            raise ValueError(f"constants_mode must be one of {CONSTANTS_MODES}")
        if self.cl_mode not in CL_MODES:
            raise ValueError(f"cl_mode must be one of {tuple(CL_MODES)}")


@dataclass(frozen=True)
class LimitResult:
    lambda_upper: float
    assumptions: LimitAssumptions
    alpha_used: float
    c_used: float
    k_used: float = field(default=float("nan"))

    def __post_init__(self):
        if not self.lambda_upper > 0:
            raise ValueError("lambda_upper must be > 0")

    def to_dict(self, comparisons: bool = True) -> dict:
        a = self.assumptions
        d = {
            "lambda_upper_per_s": self.lambda_upper,
            "n_quasi_free": a.n_quasi_free,
            "mass_proportional": a.mass_proportional,
            "cl_mode": a.cl_mode,
            "constants_mode": a.constants_mode,
            "exposure_kg_day": a.exposure,
            "alpha_used": self.alpha_used,
            "c_used": self.c_used,
        }
        if comparisons:
            d["comparisons"] = [c.to_dict() for c in compare_models(self)]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> LimitResult:
        assumptions = LimitAssumptions(
            n_quasi_free=int(d["n_quasi_free"]),
            mass_proportional=bool(d["mass_proportional"]),
            constants_mode=d["constants_mode"],
            cl_mode=d["cl_mode"],
            exposure=float(d["exposure_kg_day"]),
        )
        return cls(float(d["lambda_upper_per_s"]), assumptions, float(d["alpha_used"]), float(d["c_used"]))


def seconds_per_day(constants: PhysicalConstants, constants_mode: str) -> float:
    if constants_mode == "paper_compat":
        return PAPER_SECONDS_PER_DAY
    if constants_mode == "exact":
        return constants.seconds_per_day
    raise ValueError(f"constants_mode must be one of {CONSTANTS_MODES}")


def factor_c(
    material: MaterialSpec = GERMANIUM,
    n_quasi_free: int = 4,
    constants_mode: str = "paper_compat",
    constants: PhysicalConstants | None = None,
) -> float:
    """Electrons times seconds per kg per day: atoms/kg * s/day * electrons/atom."""
    return material.atoms_per_kg * seconds_per_day(constants or PhysicalConstants(), constants_mode) * n_quasi_free


def quasi_free_count(material: MaterialSpec, e_min: float, safety_factor: float) -> int:
    """Electrons per atom whose binding energy is ``safety_factor`` times below ``e_min`` keV.

    Shells are taken from the outside in and counting stops at the first
    shell that fails the criterion. Returns 0 when no shell qualifies.
    """
    if not material.shells:
        raise ValueError(f"{material.name}: empty shell table")
    if not e_min > 0:
        raise DomainError("e_min must be > 0")
    if not safety_factor > 1:
        raise DomainError("safety_factor must be > 1")
    limit_ev = e_min * 1000.0
    n = 0
    for shell in material.shells:
        if shell.binding_ev * safety_factor > limit_ev:
            break
        n += shell.occupancy
    return n


def effective_alpha(alpha: float, alpha_err: float | None, cl_mode: str) -> float:
    k = CL_MODES[cl_mode]
    if k == 0.0:
        return alpha
    if alpha_err is None:
        raise ValueError(f"cl_mode {cl_mode!r} needs the amplitude uncertainty")
    return alpha + k * alpha_err


def alpha_to_lambda(
    alpha: float | FitResult,
    assumptions: LimitAssumptions = LimitAssumptions(),
    k: float | None = None,
    *,
    alpha_err: float | None = None,
    material: MaterialSpec = GERMANIUM,
    constants: PhysicalConstants | None = None,
) -> LimitResult:
    """Upper bound on lambda from an amplitude in counts over the full exposure.

    ``alpha`` may be a :class:`FitResult`, in which case its uncertainty feeds
    the ``plus_*`` confidence modes. ``k`` defaults to the per-electron
    coefficient of ``constants``.
    """
    if isinstance(alpha, FitResult):
        alpha_err = alpha.alpha_err if alpha_err is None else alpha_err
        alpha = alpha.alpha_hat
    if not (math.isfinite(alpha) and alpha > 0):
        raise DomainError(f"amplitude must be > 0, got {alpha!r}")
    constants = constants or PhysicalConstants()
    if k is None:
        k = per_electron_coefficient(constants)
    a_eff = effective_alpha(alpha, alpha_err, assumptions.cl_mode)
    c = factor_c(material, assumptions.n_quasi_free, assumptions.constants_mode, constants)
    lam = a_eff / (k * c * assumptions.exposure)
    if assumptions.mass_proportional:
        lam /= mass_prop_factor(constants)
    return LimitResult(lam, assumptions, a_eff, c, k)


def implied_alpha(
    lam: float,
    assumptions: LimitAssumptions = LimitAssumptions(),
    *,
    material: MaterialSpec = GERMANIUM,
    constants: PhysicalConstants | None = None,
) -> float:
    """Amplitude (counts) a collapse rate ``lam`` would produce; inverse of the point-estimate limit."""
    constants = constants or PhysicalConstants()
    k = per_electron_coefficient(constants)
    if assumptions.mass_proportional:
        k *= mass_prop_factor(constants)
    c = factor_c(material, assumptions.n_quasi_free, assumptions.constants_mode, constants)
    return lam * k * c * assumptions.exposure


@dataclass(frozen=True)
class Comparison:
    name: str
    reference: float | int | tuple[int, int]
    reference_value: float
    log10_distance: float
    excluded: bool
    boundary: bool
    kind: str

    @property
    def verdict(self) -> str:
        if self.boundary:
            return "boundary"
        if self.kind == "model":
            return "excluded" if self.excluded else "not excluded"
        return "tighter" if self.excluded else "looser"

    def to_dict(self) -> dict:
        ref = list(self.reference) if isinstance(self.reference, tuple) else self.reference
        return {
            "name": self.name,
            "kind": self.kind,
            "reference_value_or_magnitude": ref,
            "reference_value_per_s": self.reference_value,
            "excluded": self.excluded,
            "boundary": self.boundary,
            "verdict": self.verdict,
            "log10_distance": self.log10_distance,
        }


def _compare(name, kind, reference, ref_value, limit) -> Comparison:
    dist = math.log10(limit) - math.log10(ref_value)
    boundary = abs(dist) <= BOUNDARY_ATOL
    return Comparison(name, reference, ref_value, 0.0 if boundary else dist, dist < 0 and not boundary, boundary, kind)


def compare_models(limit: LimitResult | float) -> list[Comparison]:
    """Compare a bound with the model values and the tabulated bounds.

    ``log10_distance`` is log10(limit / reference): negative means the limit
    lies below the reference, i.e. the reference value is excluded. Table
    entries are converted with reference = lambda_CSL * 10**magnitude; for a
    magnitude range the tighter (smaller) end is used, so a bound only counts
    as improved if it beats the whole range.
    """
    lam = limit.lambda_upper if isinstance(limit, LimitResult) else float(limit)
    out = [_compare(name, "model", value, value, lam) for name, value in MODEL_VALUES]
    for name, kind, mag in TABLE1_BOUNDS:
        top = min(mag) if isinstance(mag, tuple) else mag
        out.append(_compare(name, kind, mag, LAMBDA_CSL * 10.0**top, lam))
    return out


def fu_reference() -> dict:
    """Earlier bound from the 11 keV Ge datum; stored, never recomputed."""
    return {
        "lambda_upper_per_s": FU_LIMIT,
        "source": "Fu-1997-Ge-11keV",
        "valence_electrons": 4,
        "energy_kev": 11.0,
        "note": "Single-bin evaluation with e^2 = 1/137.04 (not e^2/4pi).",
    }
