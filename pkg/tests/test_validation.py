"""Validation battery: Weyl fit, GOE statistic, bounds, overlaps."""

from pathlib import Path

import numpy as np
import pytest
from scipy.special import erf

from hyperdrum.basis import ModeCoefficients, coeff_index
from hyperdrum.formats import parse_manifold, read_spectrum
from hyperdrum.validation import (BoundsReport, ValidationError, check_bounds,
                                  circles_test, eigenvalue_bounds, goe_cdf,
                                  goe_test, normalize_mode, overlap,
                                  wavelength_ratio, weyl_staircase)

DATA = Path(__file__).resolve().parents[1] / "src" / "hyperdrum" / "data"

WEEKS_VOLUME = 0.9427


@pytest.fixture(scope="module")
def weeks():
    return parse_manifold(DATA / "weeks.mfd")


def spectrum_pairs(name):
    return [(np.sqrt(q2 - 1.0), m)
            for q2, m in read_spectrum(DATA / ("spectrum_%s.csv" % name))]


def test_weyl_slope_on_weeks_fixture():
    pairs = spectrum_pairs("weeks")
    st = weyl_staircase(pairs, WEEKS_VOLUME)
    assert st.expected == pytest.approx(WEEKS_VOLUME / (6 * np.pi ** 2))
    assert st.coeff == pytest.approx(st.expected, rel=0.15)
    assert st.counts[-1] == sum(m for _, m in pairs)
    assert st.count(pairs[0][0] - 0.01) == 0
    assert st.count(pairs[-1][0] + 0.01) == st.counts[-1]


def test_weyl_needs_enough_modes():
    with pytest.raises(ValidationError):
        weyl_staircase([(5.0, 1), (5.5, 2)], 1.0)


def test_weyl_counts_multiplicity():
    pairs = [(4.0 + 0.3 * i, 1 + i % 3) for i in range(12)]
    st = weyl_staircase(pairs, 1.0)
    assert st.counts[-1] == sum(m for _, m in pairs)


def test_goe_cdf_is_the_half_gaussian_power_law():
    xs = np.array([0.0, 0.1, 1.0, 4.0])
    assert np.allclose(goe_cdf(xs), erf(np.sqrt(xs / 2.0)))
    assert goe_cdf(0.0) == 0.0
    assert goe_cdf(50.0) > 0.999999


def _gaussian_mode(n_side, seed, k=7.0):
    rng = np.random.default_rng(seed)
    L = n_side
    a = rng.normal(size=(L + 1) ** 2)
    a /= np.linalg.norm(a)
    return ModeCoefficients(k, L, a)


def test_goe_accepts_gaussian_coefficients():
    rep = goe_test(_gaussian_mode(24, seed=3))
    assert rep.ks_stat < 0.05
    assert rep.x.shape == rep.cdf.shape
    assert rep.cdf[-1] == pytest.approx(1.0)


def test_goe_rejects_structured_coefficients():
    L = 24
    a = np.zeros((L + 1) ** 2)
    a[coeff_index(3, 2)] = 1.0   # single dominant coefficient
    a += 1e-3
    a /= np.linalg.norm(a)
    rep = goe_test(ModeCoefficients(7.0, L, a))
    assert rep.ks_stat > 0.2


def test_goe_needs_enough_samples():
    with pytest.raises(ValidationError):
        goe_test(_gaussian_mode(5, seed=0))


def test_bounds_formula():
    D = 0.843     # Weeks diameter
    lo, hi = eigenvalue_bounds(D)
    Dt = np.sqrt(np.ceil(D * D))
    assert Dt == 1.0
    assert lo == pytest.approx(4.0 * Dt / (D * D * (np.sinh(Dt) + Dt) ** 2))
    assert hi == pytest.approx(1.0 + (2.0 * np.pi / D) ** 2)
    assert lo < hi


def test_check_bounds_report():
    rep = check_bounds(0.843, q2_observed=27.8)
    assert isinstance(rep, BoundsReport)
    assert rep.passed
    assert rep.lower <= 27.8 <= rep.upper
    assert not check_bounds(0.843, q2_observed=1e-9).passed


def test_all_census_rows_satisfy_bounds():
    import csv
    with open(DATA / "census_metadata.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 12
    for row in rows:
        rep = check_bounds(float(row["diameter"]), float(row["q2_1"]))
        assert rep.passed, row["name"]
        ratio = 2.0 * np.pi / (float(row["k_1"]) * float(row["diameter"]))
        assert 1.30 <= ratio <= 1.61, row["name"]


def test_wavelength_ratio_matches_definition():
    class M:
        k = 5.18
    assert wavelength_ratio(M, 0.843) == pytest.approx(
        2.0 * np.pi / (5.18 * 0.843))


def test_normalize_and_overlap_self(weeks):
    # a smooth synthetic mode normalizes to unit L2 and overlaps itself
    # at 1 after normalization
    mode = _gaussian_mode(6, seed=9, k=4.0)
    normed = normalize_mode(mode, weeks.gens, n_mc=20000, seed=0)
    assert overlap(normed, normed, weeks.gens, n_mc=20000, seed=0) \
        == pytest.approx(1.0, abs=1e-12)


def test_overlap_is_symmetric_and_seed_stable(weeks):
    a = _gaussian_mode(6, seed=1, k=4.0)
    b = _gaussian_mode(6, seed=2, k=4.0)
    o1 = overlap(a, b, weeks.gens, n_mc=20000, seed=0)
    o2 = overlap(b, a, weeks.gens, n_mc=20000, seed=0)
    assert o1 == pytest.approx(o2, rel=1e-10)
    o3 = overlap(a, b, weeks.gens, n_mc=20000, seed=1)
    assert o3 == pytest.approx(o1, abs=0.05)


def test_circles_test_runs_on_synthetic_mode(weeks):
    mode = _gaussian_mode(8, seed=4, k=5.0)
    g = weeks.gens.elements[0]
    mism, scale = circles_test(mode, g, rho=1.0, n_samples=128)
    assert mism >= 0.0 and scale > 0.0
    # a random non-eigenmode shows order-one mismatch
    assert mism / scale > 0.2
