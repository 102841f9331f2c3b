"""
Type-I (e -> o + o) kinematics at a (signal wavelength, external angle) node.

Geometry: the pump travels along z, normal to every crystal/gap interface,
as an extraordinary wave at ``cut_angle`` to the optic axis. Signal and idler
are ordinary waves. The transverse wavevector

    q = (2 pi / lam_s) * n_gap(lam_s) * sin(theta_ext)

is conserved across all interfaces (Snell), and the idler carries -q.
Longitudinal mismatches are

    dk  = k_p  - sqrt(k_s^2  - q^2) - sqrt(k_i^2  - q^2)      (crystal)
    dk' = k_p' - sqrt(k_s'^2 - q^2) - sqrt(k_i'^2 - q^2)      (gap)

In the gap the idler index may be complex. The real part of ``dk'`` is the
phase mismatch; its imaginary part is stored as the idler amplitude
attenuation rate (>= 0), so that ``Im(phi)`` counts the idler loss through
one gap.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .dispersion import (
    AIR,
    DispersionDomainError,
    UniaxialMedium,
    extraordinary_index_at_angle,
    ordinary_index,
)

log = logging.getLogger(__name__)

TWO_PI = 2 * np.pi
MAX_EXTERNAL_ANGLE = np.deg2rad(5.0)
INTERACTION_VOLUME_THRESHOLD = 0.1


class NoPhaseMatchingError(RuntimeError):
    pass


@dataclass(frozen=True)
class PumpSpec:
    wavelength: float = 532e-9
    beam_diameter: float = 3e-3
    cut_angle: float = np.deg2rad(50.34)

    def __post_init__(self):
        if not self.wavelength > 0:
            raise ValueError("pump wavelength must be positive")
        if not self.beam_diameter > 0:
            raise ValueError("pump beam diameter must be positive")
        if not 0 < self.cut_angle < np.pi / 2:
            raise ValueError("cut angle must lie in (0, pi/2)")


@dataclass
class KinematicPoint:
    """Wavevector bookkeeping at one grid node (fields may be arrays)."""

    signal_wavelength: np.ndarray
    idler_wavelength: np.ndarray
    external_signal_angle: np.ndarray
    internal_signal_angle: np.ndarray
    internal_idler_angle: np.ndarray
    external_idler_angle: np.ndarray
    delta_k_crystal: np.ndarray
    delta_k_gap: np.ndarray
    phi: np.ndarray
    transverse_k: np.ndarray
    valid: np.ndarray


def idler_wavelength(pump_wavelength, signal_wavelength):
    """Idler wavelength from energy conservation 1/lam_i = 1/lam_p - 1/lam_s."""
    lam_s = np.asarray(signal_wavelength, dtype=float)
    return 1.0 / (1.0 / pump_wavelength - 1.0 / lam_s)


def pump_wavevector(pump: PumpSpec, crystal: UniaxialMedium, cut_angle_offset=0.0):
    """k_p inside the crystal for the extraordinary pump at ``cut_angle + offset``."""
    n_p = extraordinary_index_at_angle(crystal, pump.wavelength, pump.cut_angle + cut_angle_offset)
    return TWO_PI * n_p / pump.wavelength


def _kz(k, q):
    return np.sqrt(k * k - q * q)


def kinematics(pump: PumpSpec, crystal: UniaxialMedium, gap_medium: Callable = AIR,
               signal_wavelength=610.4e-9, external_signal_angle=0.0,
               crystal_length: float = 0.0, gap_length: float = 0.0) -> KinematicPoint:
    """Kinematic quantities at (``signal_wavelength``, ``external_signal_angle``).

    Inputs broadcast against each other. ``crystal_length`` and
    ``gap_length`` only enter ``phi = dk * l + dk' * l'``.

    Nodes where the transverse wavevector exceeds an idler or signal
    wavevector (evanescent) are flagged ``valid = False`` and carry NaN
    mismatches.
    """
    lam_s, theta = np.broadcast_arrays(
        np.asarray(signal_wavelength, dtype=float), np.asarray(external_signal_angle, dtype=float)
    )
    if np.any(lam_s <= pump.wavelength):
        raise DispersionDomainError("signal wavelength must exceed the pump wavelength")
    if np.any(np.abs(theta) > MAX_EXTERNAL_ANGLE):
        raise ValueError("external signal angle limited to 5 degrees")
    lam_i = idler_wavelength(pump.wavelength, lam_s)

    # crystal wavevectors; ordinary_index raises if lam_i leaves the band
    k_s = TWO_PI * ordinary_index(crystal, lam_s) / lam_s
    k_i = TWO_PI * ordinary_index(crystal, lam_i) / lam_i
    k_p = pump_wavevector(pump, crystal)

    n_gap_s = np.real(gap_medium(lam_s))
    n_gap_p = np.real(gap_medium(pump.wavelength))
    n_gap_i = np.asarray(gap_medium(lam_i), dtype=complex)

    q = TWO_PI * n_gap_s * np.sin(theta) / lam_s
    kg_s = TWO_PI * n_gap_s / lam_s
    kg_i = TWO_PI * n_gap_i / lam_i
    kg_p = TWO_PI * n_gap_p / pump.wavelength

    valid = (np.abs(q) < k_s) & (np.abs(q) < k_i) & (np.abs(q) < kg_s) & (np.abs(q) < np.abs(kg_i.real))
    q_safe = np.where(valid, q, 0.0)

    with np.errstate(invalid="ignore"):
        dk = k_p - _kz(k_s, q_safe) - _kz(k_i, q_safe)
        kgz_i = np.sqrt(kg_i * kg_i - q_safe * q_safe + 0j)
        dk_gap = (kg_p - _kz(kg_s, q_safe) - kgz_i.real) + 1j * np.abs(kgz_i.imag)

    theta_s_int = np.arcsin(q_safe / k_s)
    theta_i_int = -np.arcsin(q_safe / k_i)
    theta_i_ext = -np.arcsin(q_safe / np.abs(kg_i.real))

    nan = np.nan
    dk = np.where(valid, dk, nan)
    dk_gap = np.where(valid, dk_gap, nan + 0j)
    phi = dk * crystal_length + dk_gap * gap_length

    return KinematicPoint(
        signal_wavelength=lam_s[()],
        idler_wavelength=lam_i[()],
        external_signal_angle=theta[()],
        internal_signal_angle=theta_s_int[()],
        internal_idler_angle=theta_i_int[()],
        external_idler_angle=theta_i_ext[()],
        delta_k_crystal=dk[()],
        delta_k_gap=dk_gap[()],
        phi=phi[()],
        transverse_k=q[()],
        valid=valid[()],
    )


def collinear_mismatch(pump: PumpSpec, crystal: UniaxialMedium, signal_wavelength):
    """dk at theta = 0 (1/m)."""
    lam_s = np.asarray(signal_wavelength, dtype=float)
    lam_i = idler_wavelength(pump.wavelength, lam_s)
    return (pump_wavevector(pump, crystal)
            - TWO_PI * ordinary_index(crystal, lam_s) / lam_s
            - TWO_PI * ordinary_index(crystal, lam_i) / lam_i)


def collinear_signal_wavelength(pump: PumpSpec, crystal: UniaxialMedium,
                                band: tuple[float, float] = (560e-9, 660e-9)) -> float:
    """Signal wavelength with dk(theta=0) = 0, found by bracketed root search.

    The search band is clipped where the conjugate idler would leave the
    crystal's dispersion band. If several roots exist the one nearest the
    short-wavelength end is returned.
    """
    lo, hi = band
    idler_max = crystal.band[1]
    lo = max(lo, 1.0 / (1.0 / pump.wavelength - 1.0 / idler_max) * (1 + 1e-12))
    if lo >= hi:
        raise NoPhaseMatchingError("search band empty after clipping to the idler band")

    samples = np.linspace(lo, hi, 401)
    values = collinear_mismatch(pump, crystal, samples)
    sign_change = np.nonzero(np.sign(values[:-1]) != np.sign(values[1:]))[0]
    if sign_change.size == 0:
        raise NoPhaseMatchingError(
            f"no collinear phase matching between {lo * 1e9:.1f} and {hi * 1e9:.1f} nm "
            f"at cut angle {np.rad2deg(pump.cut_angle):.3f} deg"
        )
    i = sign_change[0]
    root = brentq(lambda x: float(collinear_mismatch(pump, crystal, x)),
                  samples[i], samples[i + 1], xtol=1e-18, rtol=4 * np.finfo(float).eps)
    return float(root)


@dataclass(frozen=True)
class InteractionVolumeReport:
    ratio: float
    threshold: float
    passed: bool
    message: str


def interaction_volume_ratio(crystal_length: float, gap_length: float, beam_diameter: float,
                             max_external_angle: float) -> float:
    """(2 l + l') tan(theta_max) / d."""
    return float((2 * crystal_length + gap_length) * np.tan(abs(max_external_angle)) / beam_diameter)


def interaction_volume_check(config, max_external_angle: float,
                             threshold: float = INTERACTION_VOLUME_THRESHOLD) -> InteractionVolumeReport:
    """Check that photons from neighbouring crystals stay inside the pump beam.

    Uses the longest crystal and the longest gap of ``config`` so that
    non-uniform lattices are judged by their worst period.
    """
    l = max(c.length for c in config.crystals)
    l_gap = max((g.length for g in config.gaps), default=0.0)
    ratio = interaction_volume_ratio(l, l_gap, config.pump.beam_diameter, max_external_angle)
    passed = ratio <= threshold
    if passed:
        message = f"interaction volume ok: (2l + l')tan(theta)/d = {ratio:.4f} <= {threshold}"
    else:
        message = (f"signal/idler walk out of the pump: (2l + l')tan(theta)/d = {ratio:.4f} "
                   f"> {threshold}; contributions from distant crystals lose indistinguishability")
        log.warning(message)
    return InteractionVolumeReport(ratio, threshold, passed, message)
