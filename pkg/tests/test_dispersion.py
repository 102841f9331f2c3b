import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from superlattice.dispersion import (
    AIR,
    CLN_EDWARDS1984,
    CO2_LIKE,
    CRYSTALS,
    DispersionDomainError,
    GasModel,
    UniaxialMedium,
    calibrate_peak_absorption,
    extraordinary_index_at_angle,
    gas_complex_index,
    idler_offset_medium,
    ordinary_index,
    principal_extraordinary_index,
)

# 30-digit mpmath evaluation of the Edwards-Lawrence polynomial at 25 C
GOLDEN = {
    (532e-9, "o"): 2.3231788551701292,
    (532e-9, "e"): 2.2342358860399887,
    (610.4e-9, "o"): 2.2928042986632261,
    (610.4e-9, "e"): 2.2082356596516600,
    (4.16e-6, "o"): 2.1075413891260056,
    (4.16e-6, "e"): 2.0513732170203820,
}
GOLDEN_NE_50_34 = 2.2692164078067313

in_band = st.floats(0.45e-6, 4.9e-6)


@pytest.mark.parametrize("key", sorted(GOLDEN))
def test_golden_indices(key):
    lam, axis = key
    fn = ordinary_index if axis == "o" else principal_extraordinary_index
    assert fn(CLN_EDWARDS1984, lam) == pytest.approx(GOLDEN[key], rel=1e-14)


def test_extraordinary_at_cut_angle_golden():
    n = extraordinary_index_at_angle(CLN_EDWARDS1984, 532e-9, np.deg2rad(50.34))
    assert n == pytest.approx(GOLDEN_NE_50_34, rel=1e-14)
    assert principal_extraordinary_index(CLN_EDWARDS1984, 532e-9) < n < ordinary_index(CLN_EDWARDS1984, 532e-9)


@pytest.mark.parametrize("name", sorted(CRYSTALS))
def test_out_of_band(name):
    with pytest.raises(DispersionDomainError):
        ordinary_index(CRYSTALS[name], 300e-9)
    with pytest.raises(DispersionDomainError):
        principal_extraordinary_index(CRYSTALS[name], 6e-6)


def test_polar_angle_domain():
    with pytest.raises(DispersionDomainError):
        extraordinary_index_at_angle(CLN_EDWARDS1984, 532e-9, -0.1)
    with pytest.raises(DispersionDomainError):
        extraordinary_index_at_angle(CLN_EDWARDS1984, 532e-9, 1.6)


def test_coefficient_count_checked():
    with pytest.raises(ValueError):
        UniaxialMedium((1.0, 2.0), (1.0, 2.0), form="edwards_lawrence")


@given(in_band)
def test_axis_limits(lam):
    m = CLN_EDWARDS1984
    assert extraordinary_index_at_angle(m, lam, 0.0) == pytest.approx(ordinary_index(m, lam), rel=1e-12)
    assert extraordinary_index_at_angle(m, lam, np.pi / 2) == pytest.approx(
        principal_extraordinary_index(m, lam), rel=1e-12)


@given(in_band, st.sampled_from(sorted(CRYSTALS)))
def test_angle_monotone_and_continuous(lam, name):
    m = CRYSTALS[name]
    theta = np.linspace(0, np.pi / 2, 2001)
    n = extraordinary_index_at_angle(m, lam, theta)
    d = np.diff(n)
    # negative uniaxial: n falls from n_o to n_e
    assert np.all(d <= 0)
    assert np.max(np.abs(d)) < 1e-3


@given(in_band)
def test_pure(lam):
    a = extraordinary_index_at_angle(CLN_EDWARDS1984, lam, 0.8)
    b = extraordinary_index_at_angle(CLN_EDWARDS1984, lam, 0.8)
    assert a == b
    assert gas_complex_index(CO2_LIKE, lam) == gas_complex_index(CO2_LIKE, lam)


def test_vectorized_matches_scalar():
    lam = np.linspace(0.5e-6, 4.5e-6, 7)
    vec = ordinary_index(CLN_EDWARDS1984, lam)
    assert np.array_equal(vec, [ordinary_index(CLN_EDWARDS1984, x) for x in lam])


# --- gas ----------------------------------------------------------------------

def test_zero_concentration_is_background_exactly():
    gas = GasModel(background_index=1.000293, concentration=0.0)
    lam = np.array([4.0e-6, 4.27e-6, 4.31e-6])
    assert np.array_equal(gas_complex_index(gas, lam), np.full(3, 1.000293 + 0j))


def test_negative_concentration_rejected():
    with pytest.raises(DispersionDomainError):
        GasModel(concentration=-1.0)


def test_peak_extinction_matches_beer_lambert():
    # intensity transmission exp(-alpha l') at line centre, inverted by hand
    kappa = gas_complex_index(CO2_LIKE, CO2_LIKE.resonance_wavelength).imag
    transmission = np.exp(-4 * np.pi * kappa * 8.2e-3 / CO2_LIKE.resonance_wavelength)
    assert transmission == pytest.approx(np.exp(-CO2_LIKE.peak_absorption * 8.2e-3), rel=1e-12)


def test_concentration_scaling():
    half = GasModel(**{**CO2_LIKE.__dict__, "concentration": 1e-4})
    k_full = gas_complex_index(CO2_LIKE, 4.27e-6).imag
    assert gas_complex_index(half, 4.27e-6).imag == pytest.approx(0.5 * k_full, rel=1e-14)


def test_detuned_wing():
    on = gas_complex_index(CO2_LIKE, 4.27e-6)
    off = gas_complex_index(CO2_LIKE, 4.31e-6)
    assert abs(off.imag) < 0.1 * on.imag
    assert off.real - 1.0 != 0.0


@given(st.floats(0.01, 50.0))
def test_gas_symmetry(x):
    half = 0.5 * CO2_LIKE.linewidth
    plus = gas_complex_index(CO2_LIKE, CO2_LIKE.resonance_wavelength + x * half)
    minus = gas_complex_index(CO2_LIKE, CO2_LIKE.resonance_wavelength - x * half)
    assert plus.imag == pytest.approx(minus.imag, rel=1e-9)
    assert plus.real - 1.0 == pytest.approx(-(minus.real - 1.0), rel=1e-6)
    # Lorentzian shape of the extinction
    assert plus.imag == pytest.approx(CO2_LIKE.peak_extinction / (1 + x * x), rel=1e-6)


def test_calibration_inverts_phase():
    alpha = calibrate_peak_absorption(CO2_LIKE, 4.30565e-6, 8.2e-3, 0.23 * np.pi)
    gas = GasModel(**{**CO2_LIKE.__dict__, "peak_absorption": alpha})
    # n - 1 ~ 1e-5, so forming dn costs about five digits
    dn = gas_complex_index(gas, 4.30565e-6).real - 1.0
    assert 2 * np.pi * dn * 8.2e-3 / 4.30565e-6 == pytest.approx(0.23 * np.pi, rel=1e-8)


def test_air_and_offset_media():
    assert AIR(610e-9) == 1.0 + 0j
    m = idler_offset_medium(1e-5)
    assert m(610e-9) == 1.0 and m(4.2e-6) == 1.0 + 1e-5
