"""Binned spectrum model, CSV ingestion and energy-window restriction."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable

import numpy as np

CSV_HEADER = ("e_low_kev", "e_high_kev", "counts")

NORMALIZATIONS = ("counts_per_bin", "counts_per_kev", "counts_per_kev_kg_day")

# Relative slack when matching the upper edge of one row to the lower edge of the next
EDGE_RTOL = 1e-12


class SpectrumError(ValueError):
    """Invalid spectrum contents or input file."""


class SpectrumParseError(SpectrumError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class RangeError(SpectrumError):
    pass


@dataclass(frozen=True, eq=False)
class BinnedSpectrum:
    """Contiguous binned spectrum.

    ``values`` are interpreted according to ``normalization``; use
    :meth:`counts_per_bin` for raw counts regardless of how the file stored them.
    """

    bin_edges: np.ndarray
    values: np.ndarray
    exposure: float
    normalization: str = "counts_per_bin"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        edges = np.array(self.bin_edges, dtype=float)
        values = np.array(self.values, dtype=float)
        if edges.ndim != 1 or values.ndim != 1:
            raise SpectrumError("edges and counts must be one-dimensional")
        if values.size == 0:
            raise SpectrumError("no bins")
        if edges.size != values.size + 1:
            raise SpectrumError(f"{edges.size} edges for {values.size} bins")
        if not np.all(np.isfinite(edges)) or not np.all(np.isfinite(values)):
            raise SpectrumError("non-finite edge or count")
        if np.any(np.diff(edges) <= 0):
            raise SpectrumError("bin edges must be strictly increasing")
        if np.any(values < 0):
            raise SpectrumError("counts must be non-negative")
        if not (math.isfinite(self.exposure) and self.exposure > 0):
            raise SpectrumError(f"exposure must be > 0, got {self.exposure!r}")
        if self.normalization not in NORMALIZATIONS:
            raise SpectrumError(f"unknown normalization {self.normalization!r}")
        edges.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "values", values)

    @property
    def n_bins(self) -> int:
        return self.values.size

    @property
    def e_lo(self) -> np.ndarray:
        return self.bin_edges[:-1]

    @property
    def e_hi(self) -> np.ndarray:
        return self.bin_edges[1:]

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.bin_edges)

    @property
    def window(self) -> tuple[float, float]:
        return float(self.bin_edges[0]), float(self.bin_edges[-1])

    def counts_per_bin(self) -> np.ndarray:
        if self.normalization == "counts_per_bin":
            return self.values
        if self.normalization == "counts_per_kev":
            return self.values * self.widths
        return self.values * self.widths * self.exposure

    @property
    def total_counts(self) -> float:
        return float(self.counts_per_bin().sum())

    def as_counts(self) -> BinnedSpectrum:
        if self.normalization == "counts_per_bin":
            return self
        return BinnedSpectrum(self.bin_edges, self.counts_per_bin(), self.exposure, "counts_per_bin", dict(self.meta))

    def __eq__(self, other):
        if not isinstance(other, BinnedSpectrum):
            return NotImplemented
        return (
            np.array_equal(self.bin_edges, other.bin_edges)
            and np.array_equal(self.values, other.values)
            and self.exposure == other.exposure
            and self.normalization == other.normalization
        )

    __hash__ = None


@dataclass(frozen=True)
class Shell:
    label: str
    binding_ev: float
    occupancy: int


@dataclass(frozen=True)
class MaterialSpec:
    """Target material. ``shells`` run from the outermost (least bound) inward."""

    name: str
    atoms_per_kg: float
    shells: tuple[Shell, ...] = ()

    def __post_init__(self):
        if not self.atoms_per_kg > 0:
            raise ValueError("atoms_per_kg must be > 0")
        shells = tuple(s if isinstance(s, Shell) else Shell(*s) for s in self.shells)
        for s in shells:
            if not (isinstance(s.occupancy, int) and s.occupancy > 0):
                raise ValueError(f"shell {s.label}: occupancy must be a positive integer")
            if not s.binding_ev > 0:
                raise ValueError(f"shell {s.label}: binding energy must be > 0")
        if any(b.binding_ev < a.binding_ev for a, b in zip(shells, shells[1:])):
            raise ValueError("shells must be listed in increasing binding energy")
        object.__setattr__(self, "shells", shells)

    @property
    def electrons_per_atom(self) -> int:
        return sum(s.occupancy for s in self.shells)


AVOGADRO = 6.02214076e23
GE_MOLAR_MASS_G = 72.630

# Ge (Z=32) binding energies [eV]; 3s is the value quoted for the analysis,
# deeper shells from standard X-ray data tables.
GE_SHELLS = (
    Shell("4p", 7.9, 2),
    Shell("4s", 15.6, 2),
    Shell("3d", 29.2, 10),
    Shell("3p", 124.9, 6),
    Shell("3s", 180.1, 2),
    Shell("2p", 1217.0, 6),
    Shell("2s", 1414.6, 2),
    Shell("1s", 11103.1, 2),
)

GERMANIUM = MaterialSpec("Ge", 8.9e24, GE_SHELLS)
GERMANIUM_MOLAR = MaterialSpec("Ge (molar)", AVOGADRO / GE_MOLAR_MASS_G * 1000.0, GE_SHELLS)


def _read_rows(lines: Iterable[str]):
    header_seen = False
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in next(csv.reader([line]))]
        if not header_seen and fields and fields[0] == CSV_HEADER[0]:
            if tuple(fields) != CSV_HEADER:
                raise SpectrumParseError(f"expected header {','.join(CSV_HEADER)}", lineno)
            header_seen = True
            continue
        if len(fields) != 3:
            raise SpectrumParseError(f"expected 3 fields, got {len(fields)}", lineno)
        try:
            lo, hi, n = (float(f) for f in fields)
        except ValueError:
            raise SpectrumParseError(f"non-numeric field in {line!r}", lineno) from None
        yield lineno, lo, hi, n


def load_spectrum(
    source: str | Path | IO,
    exposure: float | None = None,
    normalization: str | None = None,
) -> BinnedSpectrum:
    """Read a spectrum CSV.

    ``source`` may be a path, a text or binary stream. When ``exposure`` or
    ``normalization`` is omitted and ``source`` is a path, they are taken from
    the sidecar ``<name>.json`` (keys ``exposure_kg_day``, ``normalization``).
    """
    meta = {}
    if isinstance(source, (str, Path)):
        path = Path(source)
        sidecar = sidecar_path(path)
        if sidecar.exists():
            meta = json.loads(sidecar.read_text(encoding="utf-8"))
        with open(path, "rb") as fh:
            text = fh.read().decode("utf-8")
    else:
        data = source.read()
        text = data.decode("utf-8") if isinstance(data, bytes) else data
    if exposure is None:
        exposure = meta.get("exposure_kg_day")
        if exposure is None:
            raise SpectrumError("exposure not given and no sidecar metadata found")
    if normalization is None:
        normalization = meta.get("normalization", "counts_per_bin")

    edges: list[float] = []
    values: list[float] = []
    for lineno, lo, hi, n in _read_rows(io.StringIO(text)):
        if not (math.isfinite(lo) and math.isfinite(hi) and math.isfinite(n)):
            raise SpectrumParseError("non-finite value", lineno)
        if hi <= lo:
            raise SpectrumParseError(f"descending or empty bin [{lo}, {hi}]", lineno)
        if n < 0:
            raise SpectrumParseError(f"negative counts {n}", lineno)
        if edges:
            prev = edges[-1]
            if lo < prev and not math.isclose(lo, prev, rel_tol=EDGE_RTOL):
                raise SpectrumParseError(f"bin [{lo}, {hi}] overlaps previous bin ending at {prev}", lineno)
            if lo > prev and not math.isclose(lo, prev, rel_tol=EDGE_RTOL):
                raise SpectrumParseError(f"gap between {prev} and {lo}; bins must be contiguous", lineno)
            edges.append(hi)
        else:
            edges.extend([lo, hi])
        values.append(n)
    if not values:
        raise SpectrumError("no bins")
    extra = {k: v for k, v in meta.items() if k not in ("exposure_kg_day", "normalization")}
    return BinnedSpectrum(np.array(edges), np.array(values), float(exposure), normalization, extra)


def sidecar_path(path: str | Path) -> Path:
    return Path(path).with_suffix(".json")


def format_spectrum(s: BinnedSpectrum, comments: Iterable[str] = ()) -> str:
    out = io.StringIO()
    for c in comments:
        out.write(f"# {c}\n")
    out.write(",".join(CSV_HEADER) + "\n")
    for lo, hi, v in zip(s.e_lo, s.e_hi, s.values):
        count = int(v) if float(v).is_integer() else repr(float(v))
        out.write(f"{float(lo)!r},{float(hi)!r},{count}\n")
    return out.getvalue()


def save_spectrum(
    s: BinnedSpectrum,
    path: str | Path,
    comments: Iterable[str] = (),
    extra_meta: dict | None = None,
) -> None:
    """Write ``s`` as CSV plus the sidecar JSON holding exposure and normalization."""
    path = Path(path)
    path.write_text(format_spectrum(s, comments), encoding="utf-8")
    meta = {"exposure_kg_day": s.exposure, "normalization": s.normalization}
    meta.update(s.meta)
    if extra_meta:
        meta.update(extra_meta)
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def restrict_range(s: BinnedSpectrum, e_lo: float, e_hi: float) -> BinnedSpectrum:
    """Keep the bins lying entirely inside ``[e_lo, e_hi]``; partial bins are dropped."""
    if not e_lo < e_hi:
        raise RangeError(f"empty window [{e_lo}, {e_hi}]")
    keep = (s.e_lo >= e_lo) & (s.e_hi <= e_hi)
    if not keep.any():
        raise RangeError(f"no bins inside [{e_lo}, {e_hi}] keV")
    if keep.all():
        return s
    idx = np.flatnonzero(keep)
    # bins are contiguous, so the kept set is a single run
    first, last = idx[0], idx[-1]
    return BinnedSpectrum(s.bin_edges[first : last + 2], s.values[first : last + 1], s.exposure, s.normalization, dict(s.meta))


def neyman_sigma(counts: np.ndarray) -> np.ndarray:
    """Per-bin sigma sqrt(n) floored at 1 count."""
    return np.maximum(np.sqrt(counts), 1.0)


def to_rate_density(s: BinnedSpectrum) -> tuple[np.ndarray, np.ndarray]:
    """Rate in counts/(keV kg day) and its Poisson uncertainty per bin.

    Any normalization is first converted back to counts per bin. Empty bins
    get the one-count floor of :func:`neyman_sigma`.
    """
    widths = s.widths
    if np.any(widths <= 0):
        raise SpectrumError("zero-width bin")
    counts = s.counts_per_bin()
    scale = widths * s.exposure
    return counts / scale, neyman_sigma(counts) / scale


def from_rate_density(rate, bin_edges, exposure: float) -> BinnedSpectrum:
    """Inverse of :func:`to_rate_density` for the rate values."""
    edges = np.asarray(bin_edges, dtype=float)
    counts = np.asarray(rate, dtype=float) * np.diff(edges) * exposure
    return BinnedSpectrum(edges, counts, exposure, "counts_per_bin")
