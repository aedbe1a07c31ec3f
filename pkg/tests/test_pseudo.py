import importlib.util
import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from cslxray.limits import LimitAssumptions
from cslxray.physics import DomainError
from cslxray.pseudo import (
    ClosureReport,
    SimulationConfig,
    closure_study,
    default_edges,
    one_over_e_cdf,
    run_trials,
    sample_energy,
    simulate_spectrum,
    summarize,
    write_trials_csv,
)
from cslxray.spectrum import load_spectrum
from oracles import ks_distance, quad_counts


def test_sample_energy_endpoints_and_median():
    assert sample_energy(0.0, 4.5, 48.5) == 4.5
    assert sample_energy(1.0, 4.5, 48.5) == 48.5
    assert sample_energy(0.5, 4.5, 48.5) == pytest.approx(math.sqrt(4.5 * 48.5), rel=1e-14)
    assert sample_energy(0.5, 4.5, 48.5) == pytest.approx(14.773, abs=1e-3)


@pytest.mark.parametrize("args", [(0.5, 0.0, 1.0), (0.5, 2.0, 1.0), (-0.1, 1.0, 2.0), (1.1, 1.0, 2.0)])
def test_sample_energy_domain(args):
    with pytest.raises(DomainError):
        sample_energy(*args)


def test_sample_energy_ks():
    u = np.random.default_rng(7).random(10**5)
    e = sample_energy(u, 4.5, 48.5)
    assert e.min() >= 4.5 and e.max() <= 48.5
    d = ks_distance(e, lambda x: np.log(x / 4.5) / np.log(48.5 / 4.5))
    assert d < 1.63 / math.sqrt(1e5)
    assert d == pytest.approx(stats.kstest(e, lambda x: one_over_e_cdf(x, 4.5, 48.5)).statistic, rel=1e-12)


def test_zero_signal_zero_background():
    s = simulate_spectrum(SimulationConfig(lambda_true=0.0))
    assert s.total_counts == 0


def test_alpha_equivalent_total():
    cfg = SimulationConfig.for_alpha(110.0)
    assert cfg.alpha_true == pytest.approx(110.0, rel=1e-12)
    mu = cfg.expected_bin_means()
    assert mu.sum() == pytest.approx(261.53, abs=0.01)
    assert mu.sum() == pytest.approx(quad_counts(110.0, 4.5, 48.5), rel=1e-12)


def test_same_seed_identical():
    cfg = SimulationConfig.for_alpha(110.0, seed=42, background_rate=0.01)
    a, b = simulate_spectrum(cfg, 3), simulate_spectrum(cfg, 3)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, simulate_spectrum(cfg, 4).values)
    assert not np.array_equal(a.values, simulate_spectrum(replace(cfg, seed=43), 3).values)


def test_threads_do_not_change_results():
    cfg = SimulationConfig.for_alpha(110.0, seed=5, assumptions=LimitAssumptions(cl_mode="plus_1sigma"))
    serial = closure_study(cfg, 40)
    threaded = closure_study(cfg, 40, workers=4)
    assert serial == threaded


def test_bin_means_via_simulate():
    cfg = SimulationConfig.for_alpha(110.0, seed=12)
    mu = cfg.expected_bin_means()
    n = 10_000
    total = np.zeros_like(mu)
    for t in range(n):
        total += simulate_spectrum(cfg, t).values
    z = (total / n - mu) / np.sqrt(mu / n)
    # 3 standard errors per bin; over 44 bins a few excursions are expected,
    # so bound their number by the binomial tail (P(>= 3) ~ 3e-4)
    assert np.sum(np.abs(z) >= 3) <= 2
    assert np.all(np.abs(z) < 5)
    assert stats.chi2.sf(np.sum(z**2), mu.size) > 1e-3


def test_monotone_in_lambda():
    lo = SimulationConfig(lambda_true=1e-18, background_rate=0.1)
    hi = replace(lo, lambda_true=2e-18)
    assert np.all(hi.expected_bin_means() > lo.expected_bin_means())


def test_event_sampling_matches_binned():
    base = SimulationConfig.for_alpha(110.0, seed=3, background_rate=0.005)
    ev = replace(base, sampling="events")
    n = 2000
    a = np.sum([simulate_spectrum(base, t).values for t in range(n)], axis=0)
    b = np.sum([simulate_spectrum(ev, t).values for t in range(n)], axis=0)
    mu = base.expected_bin_means() * n
    # both are Poisson with the same means; compare via a two-sample chi2
    chi2 = np.sum((a - b) ** 2 / (a + b))
    assert stats.chi2.sf(chi2, a.size) > 1e-3
    assert np.sum((b - mu) ** 2 / mu) < stats.chi2.ppf(0.999, a.size)


def test_degenerate_trials_counted():
    r = closure_study(SimulationConfig(lambda_true=0.0), 1)
    assert r.n_trials == 1 and r.n_failed == 1
    assert r.coverage is None and not r.coverage_defined
    assert r.mean_alpha is None
    assert r.failures == {"zero total counts": 1}


def test_closure_statistics_small():
    cfg = SimulationConfig.for_alpha(110.0, seed=9, assumptions=LimitAssumptions(cl_mode="plus_1p645sigma"))
    r = closure_study(cfg, 100)
    assert isinstance(r, ClosureReport)
    assert r.n_failed == 0
    assert abs(r.mean_alpha - 110) < 3 * 110 / math.sqrt(261.5) / math.sqrt(100)
    assert 0.85 <= r.coverage <= 1.0
    assert r.mean_lambda == pytest.approx(r.mean_alpha / 110 * cfg.lambda_true, rel=1e-12)
    d = r.to_dict()
    assert d["config"]["rng"].startswith("numpy.random.PCG64")


def test_trials_csv(tmp_path):
    cfg = SimulationConfig.for_alpha(50.0, seed=1)
    outcomes = run_trials(cfg, 5)
    p = tmp_path / "t.csv"
    write_trials_csv(outcomes, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "trial,alpha_hat,lambda_upper"
    assert len(lines) == 6
    assert summarize(cfg, outcomes).n_trials == 5


def test_config_validation():
    with pytest.raises(ValueError):
        SimulationConfig(lambda_true=-1)
    with pytest.raises(ValueError):
        SimulationConfig(lambda_true=0, background_rate=-1)
    with pytest.raises(ValueError):
        SimulationConfig(lambda_true=0, bin_edges=[3, 2])
    with pytest.raises(ValueError):
        SimulationConfig(lambda_true=0, seed=-1)
    with pytest.raises(ValueError):
        closure_study(SimulationConfig(lambda_true=0), 0)
    cfg = SimulationConfig(lambda_true=0, exposure=10.0)
    assert cfg.assumptions.exposure == 10.0


def test_default_edges():
    e = default_edges()
    assert e[0] == 4.5 and e[-1] == 48.5 and e.size == 45


def test_shipped_fixtures_regenerate(data_dir):
    spec = importlib.util.spec_from_file_location("make_fixtures", data_dir.parents[2] / "scripts" / "make_fixtures.py")
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    for name in mod.FIXTURES:
        _, s = mod.build(name)
        shipped = load_spectrum(data_dir / name)
        assert shipped == s
        assert shipped.meta["provenance"] == "synthetic"
