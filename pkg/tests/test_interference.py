from types import SimpleNamespace

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.signal import find_peaks

from superlattice.dispersion import AIR, CLN_EDWARDS1984, CO2_LIKE, ConstantIndex, GasModel
from superlattice.interference import (
    CrystalElement,
    GapElement,
    Grid,
    PatternError,
    SuperlatticeConfig,
    accumulated_phases,
    closed_form_intensity,
    defect_closed_form,
    intensity_map,
    pattern,
    single_crystal_amplitude,
)
from superlattice.phasematch import kinematics

from conftest import L, L_GAP, PUMP, PUMP_501, uniform

GOLDEN_N2_MAXIMA = 25  # maxima in |theta| <= 0.85 deg at 610.4 nm, 601-point axis


def grid_kin(config, grid, medium=AIR):
    lam, th = np.meshgrid(grid.signal_wavelengths, grid.external_angles, indexing="ij")
    return kinematics(config.pump, config.crystal_medium, medium, lam, th)


def test_amplitude_examples():
    assert single_crystal_amplitude(0.0, L) == 1.0 + 0j
    assert abs(single_crystal_amplitude(2 * np.pi / L, L)) < 1e-12
    assert abs(single_crystal_amplitude(np.pi / L, L)) == pytest.approx(2 / np.pi, abs=1e-12)


@given(st.one_of(st.floats(-1e-6, 1e-6), st.floats(-30, 30)))
def test_amplitude_against_high_precision(x):
    mp.mp.dps = 40
    xm = mp.mpf(x)
    ref = mp.mpf(1) if xm == 0 else (1 - mp.exp(-1j * xm)) / (1j * xm)
    got = single_crystal_amplitude(x, 1.0)
    assert abs(complex(ref) - got) < 4e-16


def test_closed_form_examples():
    assert closed_form_intensity(0.0, 0.0, 5, L) == 25.0
    assert closed_form_intensity(1234.0, 2 * np.pi / 3, 3, L) == pytest.approx(0.0, abs=1e-25)


@given(st.floats(-20, 20), st.floats(-np.pi, np.pi), st.integers(1, 8))
def test_closed_form_brute_force(x, phi, n):
    a = single_crystal_amplitude(x, 1.0)
    brute = abs(sum(a * np.exp(-1j * k * phi) for k in range(n))) ** 2
    cf = closed_form_intensity(x, phi, n, 1.0)
    assert cf == pytest.approx(brute, rel=1e-12, abs=1e-12 * n * n)


@pytest.mark.parametrize("n", range(2, 9))
def test_extrema_positions_in_phi(n):
    # principal maxima at 2 pi m, zeros at 2 pi m'/N
    for m in (0, 1, 3):
        assert closed_form_intensity(0.0, 2 * np.pi * m, n, L) == pytest.approx(n * n, rel=1e-12)
    for mp in range(1, n):
        assert closed_form_intensity(0.0, 2 * np.pi * mp / n, n, L) < 1e-24
    phi = np.linspace(-0.5, 2 * np.pi + 0.5, 200001)
    y = closed_form_intensity(0.0, phi, n, L)
    peaks, _ = find_peaks(y)
    principal = phi[peaks][y[peaks] > 0.99 * n * n]
    assert np.allclose(principal, [0.0, 2 * np.pi], atol=1e-4)


def test_accumulated_phases_uniform():
    cfg = uniform(5)
    k = kinematics(PUMP, CLN_EDWARDS1984, AIR, 610.4e-9, 0.004, L, L_GAP)
    psi = accumulated_phases(cfg, k)
    for n, p in enumerate(psi):
        assert p == pytest.approx(n * k.phi, rel=1e-14, abs=1e-14)


def test_accumulated_phases_defect():
    cfg = uniform(5, disabled=[3])
    k = kinematics(PUMP, CLN_EDWARDS1984, AIR, 610.4e-9, 0.004, L, L_GAP)
    phi, dk, dkg = k.phi.real, k.delta_k_crystal, k.delta_k_gap.real
    psi = [p.real for p in accumulated_phases(cfg, k)]
    # the empty slot is crossed as gap medium; crystal 2 still adds dk l
    slot = phi + dk * L + dkg * (L + 2 * L_GAP)
    assert psi == pytest.approx([0.0, phi, slot, slot + phi], rel=1e-13)


def test_accumulated_phases_absorbing():
    cfg = uniform(5, pump=PUMP_501, gap_medium=CO2_LIKE)
    k = kinematics(PUMP_501, CLN_EDWARDS1984, CO2_LIKE, 607e-9, 0.004, L, L_GAP)
    im = [p.imag for p in accumulated_phases(cfg, k)]
    assert im[0] == 0 and np.all(np.diff(im) > 0)


def test_mixed_media_needs_grid():
    cfg = uniform(3).with_gap_length(0, L_GAP)
    cfg = SuperlatticeConfig(PUMP, cfg.crystals, (GapElement(L_GAP, AIR), GapElement(L_GAP, CO2_LIKE)))
    with pytest.raises(PatternError):
        accumulated_phases(cfg, kinematics(PUMP, CLN_EDWARDS1984, AIR, 610e-9, 0.0))


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_pattern_equals_closed_form(n, coarse_grid):
    cfg = uniform(n)
    raw, valid = intensity_map(cfg, coarse_grid)
    k = grid_kin(cfg, coarse_grid)
    cf = closed_form_intensity(k.delta_k_crystal, k.delta_k_crystal * L + k.delta_k_gap.real * L_GAP, n, L)
    assert valid.all()
    # relative to the peak scale N^2: pointwise ratios are meaningless at exact zeros
    assert np.max(np.abs(raw - cf)) <= 1e-10 * n * n


def test_zero_gap_merge(coarse_grid):
    cfg = SuperlatticeConfig.uniform(5, L, 0.0, pump=PUMP)
    raw, _ = intensity_map(cfg, coarse_grid)
    dk = grid_kin(cfg, coarse_grid).delta_k_crystal
    merged = 25 * abs(single_crystal_amplitude(dk, 5 * L)) ** 2
    assert np.max(np.abs(raw - merged)) <= 1e-9 * 25


def test_normalization_exact(coarse_grid):
    for n in (1, 2, 4):
        assert pattern(uniform(n), coarse_grid).intensity.max() == 1.0


def test_translation_invariance(coarse_grid):
    base = uniform(5)
    ref = pattern(uniform(1), coarse_grid).intensity
    for keep in range(1, 6):
        cfg = base.with_disabled([k for k in range(1, 6) if k != keep])
        assert np.allclose(pattern(cfg, coarse_grid).intensity, ref, rtol=1e-12, atol=1e-14)


def test_single_crystal_no_fringes():
    grid = Grid.uniform(609.9e-9, 610.1e-9, 3, np.deg2rad(0.85), 601)
    pat = pattern(uniform(1), grid)
    for row in pat.intensity:
        half = row[grid.external_angles >= 0]
        peaks, _ = find_peaks(half)
        # unimodal in |theta| inside the central envelope lobe
        assert peaks.size <= 1


def test_full_absorption_limit(coarse_grid):
    # broad line over every idler on the grid: amplitude transmission per gap ~ e^-400
    opaque = GasModel(background_index=1.0, resonance_wavelength=4.16e-6, linewidth=2e-6,
                      peak_absorption=1e5, reference_concentration=1.0, concentration=1.0)
    cfg = uniform(5, gap_medium=opaque)
    coherent, _ = intensity_map(cfg, coarse_grid)
    incoherent, _ = intensity_map(cfg, coarse_grid, coherent=False)
    assert np.allclose(coherent, incoherent, rtol=1e-12, atol=0)


def test_lossless_incoherent_is_sum_of_rates(coarse_grid):
    cfg = uniform(3)
    inc, _ = intensity_map(cfg, coarse_grid, coherent=False)
    single, _ = intensity_map(uniform(1), coarse_grid)
    assert np.allclose(inc, 3 * single, rtol=1e-12)


def test_golden_fringe_count():
    grid = Grid(np.array([610.4e-9]), np.linspace(-np.deg2rad(0.85), np.deg2rad(0.85), 601))
    row = pattern(uniform(2), grid).intensity[0]
    peaks, _ = find_peaks(row)
    assert peaks.size == GOLDEN_N2_MAXIMA


def test_defect_closed_form_examples():
    pi_point = SimpleNamespace(delta_k_crystal=0.0, delta_k_gap=np.pi / L_GAP)
    assert defect_closed_form(pi_point, L, L_GAP) == pytest.approx(0.0, abs=1e-28)
    zero = SimpleNamespace(delta_k_crystal=0.0, delta_k_gap=0.0)
    assert defect_closed_form(zero, L, L_GAP) == 16.0


def test_defect_matches_engine():
    grid = Grid.uniform(607.3e-9, 609.3e-9, 11, np.deg2rad(0.85), 301)
    cfg = uniform(5, pump=PUMP_501, disabled=[3])
    raw, _ = intensity_map(cfg, grid)
    cf = defect_closed_form(grid_kin(cfg, grid), L, L_GAP)
    assert np.max(np.abs(raw - cf) / cf) <= 1e-9


def test_cut_angle_offset_shifts_mismatch(coarse_grid):
    cfg = uniform(1)
    tilted = SuperlatticeConfig(PUMP, (CrystalElement(L, np.deg2rad(0.02)),))
    a, _ = intensity_map(cfg, coarse_grid)
    b, _ = intensity_map(tilted, coarse_grid)
    assert not np.allclose(a, b)
    zero = SuperlatticeConfig(PUMP, (CrystalElement(L, 0.0),))
    assert np.array_equal(intensity_map(zero, coarse_grid)[0], a)


def test_thread_count_independent(coarse_grid):
    grid = Grid.uniform(607e-9, 614e-9, 97, np.deg2rad(0.85), 61)
    a, _ = intensity_map(uniform(5), grid, threads=1)
    b, _ = intensity_map(uniform(5), grid, threads=4)
    assert np.array_equal(a, b)


def test_errors():
    with pytest.raises(PatternError):
        Grid(np.array([]), np.array([0.0]))
    with pytest.raises(PatternError):
        Grid(np.array([611e-9, 610e-9]), np.array([0.0]))
    with pytest.raises(PatternError):
        pattern(uniform(2, disabled=[1, 2]), Grid(np.array([610e-9]), np.array([0.0])))
    with pytest.raises(ValueError):
        SuperlatticeConfig(PUMP, (CrystalElement(),) * 5, (GapElement(),) * 3)
    with pytest.raises(ValueError):
        CrystalElement(length=0.0)
    with pytest.raises(ValueError):
        GapElement(length=-1e-3)


def test_constant_index_gap_shifts_fringes(coarse_grid):
    a, _ = intensity_map(uniform(2), coarse_grid)
    b, _ = intensity_map(uniform(2, gap_medium=ConstantIndex(1.0003)), coarse_grid)
    assert not np.allclose(a, b)
