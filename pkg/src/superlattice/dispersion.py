"""
Refractive-index models for the superlattice media.

Three kinds of media appear in a superlattice:

* the uniaxial nonlinear crystal (lithium niobate), described by a
  temperature-dependent Sellmeier set for the ordinary and extraordinary axes;
* the linear gap, by default vacuum-like air with index exactly 1;
* an absorbing gas, described by a single Lorentz line.

All wavelengths are vacuum wavelengths in meters. Every function accepts
scalars or numpy arrays and is pure.

Built-in crystal sets
---------------------
``cln_edwards1984``
    Congruent LiNbO3, G. J. Edwards and M. Lawrence, Opt. Quantum Electron.
    16, 373 (1984). Default. Form::

        n^2 = A1 + B3 F + (A2 + B1 F) / (lam^2 - (A3 + B2 F)^2) - A4 lam^2
        F = (T - 24.5)(T + 570.82),   T in deg C, lam in um

``mgo_cln_gayer2008``
    5 mol% MgO-doped congruent LiNbO3, O. Gayer et al., Appl. Phys. B 91,
    343 (2008). Form::

        n^2 = a1 + b1 F + (a2 + b2 F) / (lam^2 - (a3 + b3 F)^2)
              + (a4 + b4 F) / (lam^2 - a5^2) - a6 lam^2

``cln_zelmon1997``
    Congruent LiNbO3, D. E. Zelmon et al., JOSA B 14, 3319 (1997), 21 deg C.
    Three-term Sellmeier ``n^2 = 1 + sum(A_j lam^2 / (lam^2 - B_j))``.

See ``README.md`` for the phase-matching residual of each set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SUPPORTED_BAND = (0.4e-6, 5.0e-6)

SELLMEIER_FORMS = ("edwards_lawrence", "gayer", "sellmeier3")


class DispersionDomainError(ValueError):
    """Raised when a medium is evaluated outside its supported band."""


@dataclass(frozen=True)
class UniaxialMedium:
    """Uniaxial crystal with separate ordinary and extraordinary Sellmeier sets.

    Coefficients are stored verbatim in the order of the published table
    for the chosen ``form``. ``temperature`` is in kelvin.
    """

    sellmeier_ordinary: tuple[float, ...]
    sellmeier_extraordinary: tuple[float, ...]
    temperature: float = 298.15
    label: str = ""
    form: str = "edwards_lawrence"
    band: tuple[float, float] = SUPPORTED_BAND

    def __post_init__(self):
        if self.form not in SELLMEIER_FORMS:
            raise ValueError(f"unknown Sellmeier form {self.form!r}; expected one of {SELLMEIER_FORMS}")
        expected = {"edwards_lawrence": 7, "gayer": 10, "sellmeier3": 6}[self.form]
        for name in ("sellmeier_ordinary", "sellmeier_extraordinary"):
            coeffs = tuple(float(c) for c in getattr(self, name))
            if len(coeffs) != expected:
                raise ValueError(f"{name} needs {expected} coefficients for form {self.form!r}, got {len(coeffs)}")
            object.__setattr__(self, name, coeffs)
        if self.temperature <= 0:
            raise ValueError("temperature must be positive (kelvin)")


CLN_EDWARDS1984 = UniaxialMedium(
    # A1, A2, A3, A4, B1, B2, B3
    sellmeier_ordinary=(4.9048, 0.11775, 0.21802, 0.027153, 2.2314e-8, -2.9671e-8, 2.1429e-8),
    sellmeier_extraordinary=(4.5820, 0.09921, 0.21090, 0.021940, 5.2716e-8, -4.9143e-8, 2.2971e-7),
    temperature=298.15,
    label="congruent LiNbO3 (Edwards & Lawrence 1984), 25 C",
    form="edwards_lawrence",
)

MGO_CLN_GAYER2008 = UniaxialMedium(
    # a1..a6, b1..b4
    sellmeier_ordinary=(5.653, 0.1185, 0.2091, 89.61, 10.85, 1.97e-2, 7.941e-7, 3.134e-8, -4.641e-9, -2.188e-6),
    sellmeier_extraordinary=(5.756, 0.0983, 0.2020, 189.32, 12.52, 1.32e-2, 2.860e-6, 4.700e-8, 6.113e-8, 1.516e-4),
    temperature=298.15,
    label="5% MgO:LiNbO3 (Gayer et al. 2008), 25 C",
    form="gayer",
)

CLN_ZELMON1997 = UniaxialMedium(
    # A1, B1, A2, B2, A3, B3  (B in um^2)
    sellmeier_ordinary=(2.6734, 0.01764, 1.2290, 0.05914, 12.614, 474.60),
    sellmeier_extraordinary=(2.9804, 0.02047, 0.5981, 0.0666, 8.9543, 416.08),
    temperature=294.15,
    label="congruent LiNbO3 (Zelmon et al. 1997), 21 C",
    form="sellmeier3",
)

CRYSTALS = {
    "cln_edwards1984": CLN_EDWARDS1984,
    "mgo_cln_gayer2008": MGO_CLN_GAYER2008,
    "cln_zelmon1997": CLN_ZELMON1997,
}


def _check_band(wavelength, band):
    lam = np.asarray(wavelength, dtype=float)
    lo, hi = band
    if not np.all(np.isfinite(lam)) or np.any(lam < lo) or np.any(lam > hi):
        bad = lam[(lam < lo) | (lam > hi) | ~np.isfinite(lam)]
        raise DispersionDomainError(
            f"wavelength {bad.flat[0]:.6g} m outside supported band "
            f"{lo * 1e6:g}-{hi * 1e6:g} um"
        )
    return lam


def _index_squared(coeffs, form, lam_um, temp_c):
    l2 = lam_um * lam_um
    if form == "edwards_lawrence":
        a1, a2, a3, a4, b1, b2, b3 = coeffs
        f = (temp_c - 24.5) * (temp_c + 570.82)
        return a1 + b3 * f + (a2 + b1 * f) / (l2 - (a3 + b2 * f) ** 2) - a4 * l2
    if form == "gayer":
        a1, a2, a3, a4, a5, a6, b1, b2, b3, b4 = coeffs
        f = (temp_c - 24.5) * (temp_c + 570.82)
        return (a1 + b1 * f + (a2 + b2 * f) / (l2 - (a3 + b3 * f) ** 2)
                + (a4 + b4 * f) / (l2 - a5 ** 2) - a6 * l2)
    a1, b1, a2, b2, a3, b3 = coeffs
    return 1.0 + a1 * l2 / (l2 - b1) + a2 * l2 / (l2 - b2) + a3 * l2 / (l2 - b3)


def _principal_index(medium: UniaxialMedium, wavelength, coeffs):
    lam = _check_band(wavelength, medium.band)
    n2 = _index_squared(coeffs, medium.form, lam * 1e6, medium.temperature - 273.15)
    return np.sqrt(n2)


def ordinary_index(medium: UniaxialMedium, wavelength):
    """Ordinary index n_o at ``wavelength`` (m)."""
    return _principal_index(medium, wavelength, medium.sellmeier_ordinary)


def principal_extraordinary_index(medium: UniaxialMedium, wavelength):
    """Extraordinary index n_e for propagation perpendicular to the optic axis."""
    return _principal_index(medium, wavelength, medium.sellmeier_extraordinary)


def extraordinary_index_at_angle(medium: UniaxialMedium, wavelength, polar_angle):
    """Index of the extraordinary wave travelling at ``polar_angle`` to the optic axis.

    Uses ``1/n^2 = cos^2(theta)/n_o^2 + sin^2(theta)/n_e^2``.
    """
    theta = np.asarray(polar_angle, dtype=float)
    if np.any(theta < 0) or np.any(theta > np.pi / 2):
        raise DispersionDomainError("polar angle must lie in [0, pi/2]")
    n_o = ordinary_index(medium, wavelength)
    n_e = principal_extraordinary_index(medium, wavelength)
    c2 = np.cos(theta) ** 2
    s2 = np.sin(theta) ** 2
    return 1.0 / np.sqrt(c2 / n_o ** 2 + s2 / n_e ** 2)


@dataclass(frozen=True)
class ConstantIndex:
    """Non-dispersive lossless medium. The default gap is ``ConstantIndex(1.0)``."""

    index: float = 1.0
    label: str = "air"

    def __call__(self, wavelength):
        lam = np.asarray(wavelength, dtype=float)
        return np.full(lam.shape, complex(self.index, 0.0))[()]


AIR = ConstantIndex(1.0, "air")


@dataclass(frozen=True)
class GasModel:
    """Single absorption line on top of a constant background index.

    The line is the near-resonance Lorentz oscillator written in wavelength
    detuning ``x = (lam - lam0) / (fwhm / 2)``::

        n(lam) = background + kappa0 * c / c_ref / (x - 1j)

    so the extinction ``kappa0 / (1 + x^2)`` is an even Lorentzian and the
    real-part deviation ``kappa0 x / (1 + x^2)`` is odd about the line
    centre. Both come from the same complex pole. ``kappa0`` is chosen so
    the intensity attenuation coefficient at line centre equals
    ``peak_absorption`` at the reference concentration.
    """

    background_index: float = 1.0
    resonance_wavelength: float = 4.27e-6
    linewidth: float = 10e-9
    peak_absorption: float = 1.0
    reference_concentration: float = 1.0
    concentration: float = 1.0
    label: str = "gas"

    def __post_init__(self):
        if self.concentration < 0:
            raise DispersionDomainError("gas concentration must be non-negative")
        if self.reference_concentration <= 0:
            raise ValueError("reference_concentration must be positive")
        if self.linewidth <= 0 or self.resonance_wavelength <= 0:
            raise ValueError("linewidth and resonance_wavelength must be positive")
        if self.peak_absorption < 0:
            raise ValueError("peak_absorption must be non-negative")

    @property
    def peak_extinction(self) -> float:
        """Extinction coefficient kappa at line centre for the current concentration."""
        scale = self.concentration / self.reference_concentration
        return self.peak_absorption * scale * self.resonance_wavelength / (4 * np.pi)

    def __call__(self, wavelength):
        return gas_complex_index(self, wavelength)


def gas_complex_index(gas: GasModel, wavelength):
    """Complex index ``n + i kappa`` of ``gas`` at ``wavelength`` (m)."""
    lam = np.asarray(wavelength, dtype=float)
    if np.any(lam <= 0):
        raise DispersionDomainError("wavelength must be positive")
    if gas.concentration < 0:
        raise DispersionDomainError("gas concentration must be non-negative")
    if gas.concentration == 0:
        return np.full(lam.shape, complex(gas.background_index, 0.0))[()]
    x = (lam - gas.resonance_wavelength) / (0.5 * gas.linewidth)
    return (gas.background_index + gas.peak_extinction / (x - 1j))[()]


def calibrate_peak_absorption(gas: GasModel, idler_wavelength: float, gap_length: float,
                              target_phase: float) -> float:
    """Peak absorption giving an idler phase ``target_phase`` (rad) across one gap.

    The real-index deviation is linear in ``peak_absorption``, so the
    calibration is a single division.
    """
    unit = GasModel(
        background_index=gas.background_index,
        resonance_wavelength=gas.resonance_wavelength,
        linewidth=gas.linewidth,
        peak_absorption=1.0,
        reference_concentration=gas.reference_concentration,
        concentration=gas.concentration,
    )
    dn = (gas_complex_index(unit, idler_wavelength) - gas.background_index).real
    phase_per_unit = 2 * np.pi * dn * gap_length / idler_wavelength
    if phase_per_unit == 0:
        raise ValueError("gas has no dispersion at the idler wavelength")
    return float(target_phase / phase_per_unit)


# CO2-like line near 4.27 um, calibrated so that air -> gas shifts the fringes
# by 0.23 pi per 8.2 mm gap at lambda_i = 4.30565 um (signal 607 nm, pump 532 nm).
# Derivation: calibrate_peak_absorption(CO2_LIKE, 4.30565e-6, 8.2e-3, 0.23 * pi).
CO2_LIKE = GasModel(
    background_index=1.0,
    resonance_wavelength=4.27e-6,
    linewidth=10e-9,
    peak_absorption=1292.0923835704593,
    reference_concentration=2e-4,
    concentration=2e-4,
    label="co2_like",
)

GAP_MEDIA = {"air": AIR, "vacuum": ConstantIndex(1.0, "vacuum"), "co2_like": CO2_LIKE}


@dataclass(frozen=True)
class BandOffsetIndex:
    """Lossless gap whose real index is raised by ``offset`` above ``cut`` wavelength."""

    base: float = 1.0
    offset: float = 0.0
    cut: float = 2e-6
    label: str = "band_offset"

    def __call__(self, wavelength):
        lam = np.asarray(wavelength, dtype=float)
        return (self.base + np.where(lam > self.cut, self.offset, 0.0) + 0j)[()]


def idler_offset_medium(offset: float, base: float = 1.0, cut: float = 2e-6) -> BandOffsetIndex:
    """Gap that perturbs only the idler: the pump and signal sit below ``cut``."""
    return BandOffsetIndex(base=base, offset=offset, cut=cut)
