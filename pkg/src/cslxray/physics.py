"""Physical constants, natural-unit conversion and the spontaneous emission rate.

Everything is evaluated in natural units (hbar = c = 1) with energies in keV.
Lengths enter only after conversion to keV^-1 through ``hbar_c``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

# Electron mass [keV], three significant figures as in the original analysis
M_E_KEV = 511.0
# Proton mass [keV]
M_N_KEV = 938272.0
# Fine-structure constant, 1/137.04 as used in the original evaluation
ALPHA_EM = 1.0 / 137.04
# hbar*c [m keV]
HBAR_C_M_KEV = 1.9732698e-10
# Correlation length of the collapse noise [m]
A_M = 1.0e-7
SECONDS_PER_DAY = 86400.0
# Rounded day length entering the published factor c
PAPER_SECONDS_PER_DAY = 8.6e4

# CODATA 2018 values, selectable with PhysicalConstants.codata()
CODATA_M_E_KEV = 510.99895000
CODATA_M_N_KEV = 938272.08816
CODATA_ALPHA_EM = 1.0 / 137.035999084
CODATA_HBAR_C_M_KEV = 1.973269804e-10

# JSON key -> field name
CONFIG_KEYS = {
    "m_e_kev": "m_e",
    "m_n_kev": "m_N",
    "alpha_em": "alpha_em",
    "a_m": "a",
    "seconds_per_day": "seconds_per_day",
    "hbar_c_m_kev": "hbar_c",
}


class DomainError(ValueError):
    """Argument outside the domain of a physical formula."""


@dataclass(frozen=True)
class PhysicalConstants:
    """Immutable constant set. Masses in keV, ``a`` in m, ``hbar_c`` in m keV."""

    m_e: float = M_E_KEV
    m_N: float = M_N_KEV
    alpha_em: float = ALPHA_EM
    hbar_c: float = HBAR_C_M_KEV
    a: float = A_M
    seconds_per_day: float = SECONDS_PER_DAY

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and > 0, got {value!r}")
        if not self.m_e < self.m_N:
            raise ValueError("electron mass must be below the nucleon mass")
        if not self.alpha_em < 1:
            raise ValueError("alpha_em must lie in (0, 1)")

    @classmethod
    def paper_compat(cls, **overrides) -> PhysicalConstants:
        return cls(**{"seconds_per_day": PAPER_SECONDS_PER_DAY, **overrides})

    @classmethod
    def codata(cls, **overrides) -> PhysicalConstants:
        values = dict(
            m_e=CODATA_M_E_KEV,
            m_N=CODATA_M_N_KEV,
            alpha_em=CODATA_ALPHA_EM,
            hbar_c=CODATA_HBAR_C_M_KEV,
        )
        values.update(overrides)
        return cls(**values)

    @property
    def e_squared(self) -> float:
        """Squared charge in Heaviside-Lorentz units, e^2 = 4 pi alpha."""
        return 4.0 * math.pi * self.alpha_em

    @property
    def a_natural(self) -> float:
        """Correlation length in keV^-1."""
        return self.a / self.hbar_c

    def with_overrides(self, **changes) -> PhysicalConstants:
        return replace(self, **changes)

    def to_config(self) -> dict:
        return {key: getattr(self, attr) for key, attr in CONFIG_KEYS.items()}


def constants_from_mapping(data: dict, base: PhysicalConstants | None = None) -> PhysicalConstants:
    """Apply a JSON-style mapping (``m_e_kev``, ``a_m``, ...) on top of ``base``."""
    unknown = set(data) - set(CONFIG_KEYS)
    if unknown:
        raise ValueError(f"unknown constants key(s): {', '.join(sorted(unknown))}")
    changes = {CONFIG_KEYS[k]: float(v) for k, v in data.items()}
    return replace(base or PhysicalConstants(), **changes)


def load_constants(path: str | Path, base: PhysicalConstants | None = None) -> PhysicalConstants:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a JSON object")
    return constants_from_mapping(data, base)


@dataclass(frozen=True)
class EmissionModelParams:
    lam: float
    mass_proportional: bool = False
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise ValueError(f"collapse rate must be >= 0, got {self.lam!r}")


def per_electron_coefficient(constants: PhysicalConstants) -> float:
    """Coefficient ``K`` such that dGamma/dE = K * lambda / E per free electron.

    ``K = e^2 / (4 pi^2 a^2 m_e^2) = alpha_em / (pi a^2 m_e^2)`` with ``a`` in
    keV^-1, so K is dimensionless and dGamma/dE comes out in s^-1 keV^-1 for
    lambda in s^-1 and E in keV.
    """
    a = constants.a_natural
    return constants.e_squared / (4.0 * math.pi**2 * a * a * constants.m_e**2)


def mass_prop_factor(constants: PhysicalConstants) -> float:
    """Suppression (m_e / m_N)^2 of the mass-proportional coupling."""
    return (constants.m_e / constants.m_N) ** 2


def rate_density(energy, params: EmissionModelParams):
    """Photon emission rate per electron, s^-1 keV^-1, at ``energy`` keV.

    Accepts scalars or arrays.
    """
    e = np.asarray(energy, dtype=float)
    if np.any(~(e > 0)):
        raise DomainError("photon energy must be > 0")
    k = per_electron_coefficient(params.constants)
    if params.mass_proportional:
        k *= mass_prop_factor(params.constants)
    rate = k * params.lam / e
    return float(rate) if rate.ndim == 0 else rate
