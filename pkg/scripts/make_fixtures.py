"""Regenerate the synthetic spectra shipped in src/cslxray/data/.

These are pseudo-data drawn from alpha/E with alpha = 110 counts over an
80 kg day exposure. They stand in for the measured Ge spectrum, which is not
distributed here.
"""

from pathlib import Path

import numpy as np

from cslxray.pseudo import SimulationConfig, default_edges, simulate_spectrum
from cslxray.spectrum import save_spectrum

DATA = Path(__file__).resolve().parents[1] / "src" / "cslxray" / "data"

FIXTURES = {
    "synthetic_ge_4p5_48p5.csv": dict(bin_edges=default_edges(4.5, 48.5, 1.0), seed=110),
    "synthetic_ge_wide.csv": dict(bin_edges=np.arange(1.5, 61.0, 1.0), seed=111),
}


def build(name):
    cfg = SimulationConfig.for_alpha(110.0, exposure=80.0, **FIXTURES[name])
    return cfg, simulate_spectrum(cfg)


def main():
    for name in FIXTURES:
        cfg, s = build(name)
        comments = [
            "SYNTHETIC pseudo-data (not measured): counts ~ Poisson(110 * ln(hi/lo))",
            f"generated by scripts/make_fixtures.py, seed={cfg.seed}, rng=PCG64",
        ]
        save_spectrum(s, DATA / name, comments, extra_meta={"provenance": "synthetic", "alpha_true": 110.0})
        print(DATA / name, int(s.total_counts))


if __name__ == "__main__":
    main()
