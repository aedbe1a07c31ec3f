import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cslxray.spectrum import (
    GERMANIUM,
    BinnedSpectrum,
    MaterialSpec,
    RangeError,
    Shell,
    SpectrumError,
    SpectrumParseError,
    from_rate_density,
    load_spectrum,
    restrict_range,
    save_spectrum,
    to_rate_density,
)


def parse(text, exposure=80.0, normalization="counts_per_bin"):
    return load_spectrum(io.BytesIO(text.encode()), exposure=exposure, normalization=normalization)


def test_single_row():
    s = parse("1.0,2.0,5\n")
    assert s.n_bins == 1
    assert list(s.bin_edges) == [1.0, 2.0]
    assert list(s.values) == [5.0]
    assert s.exposure == 80.0


def test_header_and_comments():
    s = parse("# synthetic\ne_low_kev,e_high_kev,counts\n1,2,3\n# mid comment\n2,4,0\n")
    assert list(s.bin_edges) == [1, 2, 4]
    assert list(s.values) == [3, 0]


def test_text_stream():
    s = load_spectrum(io.StringIO("1,2,3\n"), exposure=1.0)
    assert s.total_counts == 3


@pytest.mark.parametrize(
    "text, message, line",
    [
        ("1,2,5\n1.5,3,4\n", "overlaps", 2),
        ("1,2,5\n3,4,1\n", "gap", 2),
        ("2,1,5\n", "descending", 1),
        ("# c\n1,2,-1\n", "negative", 2),
        ("1,2,5\n2,x,4\n", "non-numeric", 2),
        ("1,2\n", "3 fields", 1),
        ("e_low_kev,e_high,counts\n1,2,3\n", "header", 1),
        ("1,2,nan\n", "non-finite", 1),
    ],
)
def test_parse_errors_name_the_line(text, message, line):
    with pytest.raises(SpectrumParseError, match=message) as info:
        parse(text)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_empty_file():
    with pytest.raises(SpectrumError, match="no bins"):
        parse("")
    with pytest.raises(SpectrumError, match="no bins"):
        parse("# only a comment\ne_low_kev,e_high_kev,counts\n")


def test_missing_exposure(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("1,2,3\n")
    with pytest.raises(SpectrumError, match="exposure"):
        load_spectrum(p)


def test_invariants():
    with pytest.raises(SpectrumError):
        BinnedSpectrum([1, 2, 2], [1, 1], 1.0)
    with pytest.raises(SpectrumError):
        BinnedSpectrum([1, 2], [1, 1], 1.0)
    with pytest.raises(SpectrumError):
        BinnedSpectrum([1, 2], [1], 0.0)
    with pytest.raises(SpectrumError):
        BinnedSpectrum([1, 2], [1], 1.0, "per_second")
    s = BinnedSpectrum([1, 2], [1], 1.0)
    with pytest.raises(ValueError):
        s.values[0] = 2


EDGES = [4, 4.5, 5, 48, 48.5, 49]


def test_restrict_drops_partial_bins():
    s = BinnedSpectrum(EDGES, [1, 2, 3, 4, 5], 80.0)
    r = restrict_range(s, 4.5, 48.5)
    assert list(r.bin_edges) == [4.5, 5, 48, 48.5]
    assert list(r.values) == [2, 3, 4]


def test_restrict_identity_and_empty():
    s = BinnedSpectrum(EDGES, [1, 2, 3, 4, 5], 80.0)
    assert restrict_range(s, 0, 100) == s
    with pytest.raises(RangeError):
        restrict_range(s, 100, 200)
    with pytest.raises(RangeError):
        restrict_range(s, 5, 5)
    with pytest.raises(RangeError):
        restrict_range(s, 4.6, 4.9)


def test_rate_density_units():
    rate, err = to_rate_density(BinnedSpectrum([1, 2], [80], 80.0))
    assert rate[0] == 1.0
    assert err[0] == pytest.approx(np.sqrt(80) / 80)


def test_rate_density_zero_counts_uses_floor():
    rate, err = to_rate_density(BinnedSpectrum([1, 3], [0], 4.0))
    assert rate[0] == 0.0
    assert err[0] == pytest.approx(1.0 / (2 * 4.0))


@pytest.mark.parametrize("normalization, values", [("counts_per_kev", [10.0, 2.5]), ("counts_per_kev_kg_day", [0.5, 0.125])])
def test_other_normalizations(normalization, values):
    s = BinnedSpectrum([1, 2, 4], values, 20.0, normalization)
    np.testing.assert_allclose(s.counts_per_bin(), [10.0, 5.0])
    rate, _ = to_rate_density(s)
    np.testing.assert_allclose(rate, [0.5, 0.125])


def test_rate_round_trip():
    s = BinnedSpectrum([1, 2, 4.5, 9], [80, 3, 0], 80.0)
    rate, _ = to_rate_density(s)
    back = from_rate_density(rate, s.bin_edges, s.exposure)
    np.testing.assert_allclose(back.values, s.values, rtol=1e-15, atol=0)


def test_save_load_round_trip(tmp_path):
    s = BinnedSpectrum([4.5, 5.5, 6.5 + 1e-9, 10.0], [3, 0, 17], 80.0)
    p = tmp_path / "spec.csv"
    save_spectrum(s, p, comments=["test"])
    back = load_spectrum(p)
    assert back == s
    assert p.read_text().splitlines()[1] == "e_low_kev,e_high_kev,counts"


counts_lists = st.lists(st.integers(min_value=0, max_value=10**6), min_size=1, max_size=30)
widths = st.lists(st.floats(min_value=1e-3, max_value=50.0), min_size=30, max_size=30)


@given(counts_lists, widths, st.floats(min_value=0.01, max_value=1e4), st.floats(min_value=0.1, max_value=100))
def test_io_round_trip_property(counts, w, exposure, start):
    edges = start + np.concatenate([[0.0], np.cumsum(w[: len(counts)])])
    if np.any(np.diff(edges) <= 0):
        return
    s = BinnedSpectrum(edges, counts, exposure)
    buf = io.StringIO()
    from cslxray.spectrum import format_spectrum

    buf.write(format_spectrum(s))
    buf.seek(0)
    back = load_spectrum(buf, exposure=exposure)
    assert np.array_equal(back.values, s.values)
    np.testing.assert_allclose(back.bin_edges, s.bin_edges, rtol=1e-12)


@given(counts_lists, st.floats(min_value=0.1, max_value=1e3))
def test_rate_conserves_total(counts, exposure):
    edges = np.linspace(1.0, 50.0, len(counts) + 1)
    s = BinnedSpectrum(edges, counts, exposure)
    rate, _ = to_rate_density(s)
    total = np.sum(rate * s.widths * exposure)
    assert total == pytest.approx(sum(counts), rel=1e-9, abs=1e-12)


@given(st.floats(min_value=1.0, max_value=30.0), st.floats(min_value=1.0, max_value=30.0))
def test_restrict_idempotent(lo, span):
    s = BinnedSpectrum(np.arange(0.5, 60.6, 1.0), np.arange(60), 1.0)
    try:
        once = restrict_range(s, lo, lo + span)
    except RangeError:
        return
    assert restrict_range(once, lo, lo + span) == once


def test_germanium_shells():
    assert GERMANIUM.atoms_per_kg == 8.9e24
    assert GERMANIUM.electrons_per_atom == 32
    assert [s.label for s in GERMANIUM.shells][:5] == ["4p", "4s", "3d", "3p", "3s"]
    assert GERMANIUM.shells[4].binding_ev == 180.1


def test_material_validation():
    with pytest.raises(ValueError):
        MaterialSpec("x", 0.0)
    with pytest.raises(ValueError):
        MaterialSpec("x", 1.0, (Shell("a", 10.0, 0),))
    with pytest.raises(ValueError):
        MaterialSpec("x", 1.0, (Shell("a", 100.0, 2), Shell("b", 10.0, 2)))
    m = MaterialSpec("x", 1.0, [("a", 1.0, 2)])
    assert m.shells[0] == Shell("a", 1.0, 2)
