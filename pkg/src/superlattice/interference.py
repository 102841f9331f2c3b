"""
Biphoton amplitude engine for a crystal superlattice.

Crystal ``n`` emits the amplitude

    f_n = w_n * A(dk_n l_n) * exp(-i Re psi_n),   A(x) = (1 - exp(-i x)) / (i x)

where ``psi_n`` is the mismatch phase accumulated from the front face of the
first crystal to the front face of crystal ``n`` and ``w_n = l_n / <l>``
weights longer crystals. The detected signal intensity is

    I = sum_{n,m} f_n f_m^* T_nm,   T_nm = exp(-|Im psi_n - Im psi_m|)

``T_nm`` is the idler amplitude transmission between the two emission sites:
absorbing gaps damp the cross terms (visibility) but not the single-crystal
rates. For lossless gaps ``I = |sum f_n|^2``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .dispersion import AIR, CLN_EDWARDS1984, UniaxialMedium
from .phasematch import PumpSpec, collinear_signal_wavelength, kinematics, pump_wavevector

SINC_SERIES_CUTOFF = 1e-8
DEFAULT_ANGLE_POINTS = 601
DEFAULT_WAVELENGTH_POINTS = 801
DEFAULT_MAX_ANGLE = np.deg2rad(0.85)
DEFAULT_HALF_BAND = 5e-9
ROW_CHUNK = 32


class PatternError(ValueError):
    pass


@dataclass(frozen=True)
class CrystalElement:
    length: float = 1e-3
    cut_angle_offset: float = 0.0
    enabled: bool = True

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError("crystal length must be positive")


@dataclass(frozen=True)
class GapElement:
    length: float = 8.2e-3
    medium: Callable = AIR

    def __post_init__(self):
        if self.length < 0:
            raise ValueError("gap length must be non-negative")


@dataclass(frozen=True)
class SuperlatticeConfig:
    """Pump, crystal medium and the alternating crystal/gap sequence.

    ``crystals`` and ``gaps`` are stored separately; element ``k`` of
    ``gaps`` sits between crystals ``k`` and ``k + 1``.
    """

    pump: PumpSpec
    crystals: tuple[CrystalElement, ...]
    gaps: tuple[GapElement, ...] = ()
    crystal_medium: UniaxialMedium = CLN_EDWARDS1984

    def __post_init__(self):
        object.__setattr__(self, "crystals", tuple(self.crystals))
        object.__setattr__(self, "gaps", tuple(self.gaps))
        if len(self.crystals) < 1:
            raise ValueError("a superlattice needs at least one crystal")
        if len(self.gaps) != len(self.crystals) - 1:
            raise ValueError(
                f"{len(self.crystals)} crystals need exactly {len(self.crystals) - 1} gaps, "
                f"got {len(self.gaps)}"
            )

    @classmethod
    def uniform(cls, n_crystals: int, crystal_length: float = 1e-3, gap_length: float = 8.2e-3,
                pump: PumpSpec | None = None, crystal_medium: UniaxialMedium = CLN_EDWARDS1984,
                gap_medium: Callable = AIR, disabled: Sequence[int] = ()) -> "SuperlatticeConfig":
        """N identical crystals and equal gaps. ``disabled`` holds 1-based crystal numbers."""
        if n_crystals < 1:
            raise ValueError("n_crystals must be >= 1")
        off = set(disabled)
        if not off <= set(range(1, n_crystals + 1)):
            raise ValueError(f"disabled crystals {sorted(off)} outside 1..{n_crystals}")
        crystals = [CrystalElement(crystal_length, 0.0, (k + 1) not in off) for k in range(n_crystals)]
        gaps = [GapElement(gap_length, gap_medium) for _ in range(n_crystals - 1)]
        return cls(pump or PumpSpec(), tuple(crystals), tuple(gaps), crystal_medium)

    @property
    def n_crystals(self) -> int:
        return len(self.crystals)

    @property
    def n_enabled(self) -> int:
        return sum(c.enabled for c in self.crystals)

    def with_disabled(self, numbers: Sequence[int]) -> "SuperlatticeConfig":
        off = set(numbers)
        crystals = tuple(replace(c, enabled=c.enabled and (k + 1) not in off)
                         for k, c in enumerate(self.crystals))
        return replace(self, crystals=crystals)

    def truncated(self, n_crystals: int) -> "SuperlatticeConfig":
        """First ``n_crystals`` crystals and the gaps between them."""
        if not 1 <= n_crystals <= self.n_crystals:
            raise ValueError(f"cannot take {n_crystals} of {self.n_crystals} crystals")
        return replace(self, crystals=self.crystals[:n_crystals], gaps=self.gaps[:n_crystals - 1])

    def with_gap_length(self, index: int, length: float) -> "SuperlatticeConfig":
        gaps = list(self.gaps)
        gaps[index] = replace(gaps[index], length=length)
        return replace(self, gaps=tuple(gaps))

    def with_gap_medium(self, medium: Callable) -> "SuperlatticeConfig":
        return replace(self, gaps=tuple(replace(g, medium=medium) for g in self.gaps))


@dataclass(frozen=True)
class Grid:
    signal_wavelengths: np.ndarray
    external_angles: np.ndarray

    def __post_init__(self):
        lam = np.atleast_1d(np.asarray(self.signal_wavelengths, dtype=float))
        th = np.atleast_1d(np.asarray(self.external_angles, dtype=float))
        if lam.size == 0 or th.size == 0:
            raise PatternError("empty grid")
        if lam.ndim != 1 or th.ndim != 1:
            raise PatternError("grid axes must be one-dimensional")
        if lam.size > 1 and np.any(np.diff(lam) <= 0) or th.size > 1 and np.any(np.diff(th) <= 0):
            raise PatternError("grid axes must be strictly increasing")
        object.__setattr__(self, "signal_wavelengths", lam)
        object.__setattr__(self, "external_angles", th)

    @classmethod
    def uniform(cls, wavelength_min: float, wavelength_max: float,
                wavelength_points: int = DEFAULT_WAVELENGTH_POINTS,
                max_angle: float = DEFAULT_MAX_ANGLE, angle_points: int = DEFAULT_ANGLE_POINTS) -> "Grid":
        return cls(np.linspace(wavelength_min, wavelength_max, wavelength_points),
                   np.linspace(-max_angle, max_angle, angle_points))

    @classmethod
    def default_for(cls, config: SuperlatticeConfig, half_band: float = DEFAULT_HALF_BAND) -> "Grid":
        """601 angles over +-0.85 deg, 801 wavelengths over the collinear signal +- 5 nm."""
        centre = collinear_signal_wavelength(config.pump, config.crystal_medium)
        return cls.uniform(centre - half_band, centre + half_band)

    @property
    def shape(self) -> tuple[int, int]:
        return self.signal_wavelengths.size, self.external_angles.size


@dataclass
class InterferencePattern:
    signal_wavelengths: np.ndarray
    external_angles: np.ndarray
    intensity: np.ndarray
    normalization: float
    valid: np.ndarray | None = field(default=None, repr=False)

    @property
    def raw_intensity(self) -> np.ndarray:
        return self.intensity * self.normalization


def single_crystal_amplitude(delta_k_crystal, length):
    """(1 - exp(-i dk l)) / (i dk l); exactly 1 at dk = 0, modulus |sinc(dk l / 2)|."""
    x = np.asarray(delta_k_crystal * length, dtype=float)
    small = np.abs(x) < SINC_SERIES_CUTOFF
    # same quantity as exp(-i x / 2) sinc(x / 2), without the 1 - exp cancellation
    full = np.exp(-0.5j * x) * _sinc(0.5 * x)
    # series: 1 - i x / 2 - x^2 / 6; exactly 1 at x = 0
    series = 1.0 - 0.5j * x - x * x / 6.0
    out = np.where(small, series, full)
    return out[()] if out.ndim == 0 else out


def _sinc(x):
    # unnormalized sin(x)/x; np.sinc would round x/pi and lose digits near the zeros
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(small, 1.0 - x * x / 6.0 * (1.0 - x * x / 20.0), np.sin(x) / np.where(small, 1.0, x))
    return out[()] if out.ndim == 0 else out


def _split(a):
    # Veltkamp split into two 26-bit halves whose products are exact
    c = 134217729.0 * a
    hi = c - (c - a)
    return hi, a - hi


def _two_prod(a, b):
    """Product and its rounding error: a * b == p + err exactly."""
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _compensated_phase(pairs):
    """sum(a * b) as (hi, lo) with the rounding errors carried in lo.

    Phases reach hundreds of radians; near a zero of the amplitude sum the
    plain float64 rounding of ~1e-14 rad is what limits relative accuracy.
    """
    hi, lo = 0.0, 0.0
    for a, b in pairs:
        p, e = _two_prod(a, b)
        hi, e2 = _two_sum(hi, p)
        lo = lo + e + e2
    return hi, lo


def _sin_multiple(n: int, half):
    """sin(n * half) with the rounding error of the product compensated."""
    prod, err = _two_prod(float(n), half)
    return np.sin(prod) + np.cos(prod) * err


def closed_form_intensity(delta_k, phi, n_crystals: int, length):
    """{sinc(dk l / 2) sin(N phi / 2) / sin(phi / 2)}^2 for N identical crystals."""
    if n_crystals < 1:
        raise ValueError("n_crystals must be >= 1")
    phi = np.asarray(phi, dtype=float)
    # the squared ratio has period 2 pi; reducing first keeps sin(phi/2) exact near 2 pi m
    half = 0.5 * (phi - 2 * np.pi * np.round(phi / (2 * np.pi)))
    s = np.sin(half)
    singular = s == 0
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(singular, float(n_crystals), _sin_multiple(n_crystals, half) / np.where(singular, 1.0, s))
    out = (_sinc(0.5 * np.asarray(delta_k) * length) * ratio) ** 2
    return out[()] if np.ndim(out) == 0 else out


def defect_closed_form(point, l: float, l_prime: float):
    """Five crystals, third removed (slot filled by the gap medium), lossless gaps.

    The four amplitudes factor as A (1 + e^{-i phi})(1 + e^{-i psi_4}) with
    psi_4 = 2 dk l + dk' (l + 3 l'), hence

        I = 16 sinc^2(dk l / 2) cos^2(phi / 2) cos^2(psi_4 / 2).
    """
    dk = np.asarray(point.delta_k_crystal, dtype=float)
    dkg = np.asarray(np.real(point.delta_k_gap), dtype=float)
    # same element path as the engine: crystal, gap, slot, gap, crystal, gap
    phi, phi_lo = _compensated_phase([(dk, l), (dkg, l_prime)])
    psi4, psi4_lo = _compensated_phase([(dk, l), (dkg, l_prime), (dkg, l), (dkg, l_prime), (dk, l), (dkg, l_prime)])
    cos_phi = np.cos(0.5 * phi) - np.sin(0.5 * phi) * 0.5 * phi_lo
    cos_psi4 = np.cos(0.5 * psi4) - np.sin(0.5 * psi4) * 0.5 * psi4_lo
    return 16 * _sinc(0.5 * dk * l) ** 2 * cos_phi ** 2 * cos_psi4 ** 2


def _distinct_media(config: SuperlatticeConfig) -> list:
    media = []
    for g in config.gaps:
        if not any(g.medium == m for m in media):
            media.append(g.medium)
    return media or [AIR]


def _media_index(media, medium) -> int:
    for k, m in enumerate(media):
        if m == medium:
            return k
    raise KeyError(medium)


@dataclass
class _GridKinematics:
    delta_k: np.ndarray
    media: list
    delta_k_gap: list
    valid: np.ndarray

    def gap_mismatch(self, medium):
        return self.delta_k_gap[_media_index(self.media, medium)]


def _grid_kinematics(config: SuperlatticeConfig, lam, theta) -> _GridKinematics:
    media = _distinct_media(config)
    points = [kinematics(config.pump, config.crystal_medium, m, lam, theta) for m in media]
    valid = np.logical_and.reduce([np.asarray(p.valid) for p in points])
    return _GridKinematics(np.asarray(points[0].delta_k_crystal), media,
                           [np.asarray(p.delta_k_gap) for p in points], valid)


def _crystal_mismatches(config: SuperlatticeConfig, delta_k):
    k_p0 = pump_wavevector(config.pump, config.crystal_medium)
    out = []
    for c in config.crystals:
        if c.cut_angle_offset == 0.0:
            out.append(delta_k)
        else:
            out.append(delta_k + (pump_wavevector(config.pump, config.crystal_medium, c.cut_angle_offset) - k_p0))
    return out


def _phases_from(config: SuperlatticeConfig, kin: _GridKinematics):
    """Per-enabled-crystal (psi_n, dk_n, l_n, lo_n).

    ``lo_n`` carries the rounding error of Re psi_n (compensated summation).
    """
    dks = _crystal_mismatches(config, kin.delta_k)
    hi = np.zeros_like(kin.delta_k, dtype=float)
    lo = np.zeros_like(hi)
    loss = np.zeros_like(hi)
    out = []
    slot_medium = None

    def advance(dk, length):
        nonlocal hi, lo, loss
        p, e = _two_prod(np.real(dk), length)
        hi, e2 = _two_sum(hi, p)
        lo = lo + e + e2
        loss = loss + np.imag(dk) * length

    for k, c in enumerate(config.crystals):
        if k > 0:
            gap = config.gaps[k - 1]
            slot_medium = gap.medium
            advance(kin.gap_mismatch(gap.medium), gap.length)
        if c.enabled:
            out.append((hi + 1j * loss, dks[k], c.length, lo))
            advance(dks[k], c.length)
        else:
            # empty slot is filled by the medium of the neighbouring gap
            medium = slot_medium if slot_medium is not None else config.gaps[0].medium
            advance(kin.gap_mismatch(medium), c.length)
    return out


def accumulated_phases(config: SuperlatticeConfig, point) -> list:
    """Accumulated complex phase psi_n at the front face of each enabled crystal.

    ``point`` is a KinematicPoint computed for the config's gap medium. If
    gaps use different media use :func:`intensity_map` on a grid instead.
    Imaginary parts count idler amplitude loss.
    """
    media = _distinct_media(config)
    if len(media) > 1:
        raise PatternError("accumulated_phases with a single KinematicPoint needs one gap medium")
    kin = _GridKinematics(np.asarray(point.delta_k_crystal, dtype=float), media,
                          [np.asarray(point.delta_k_gap, dtype=complex)], np.asarray(point.valid))
    return [p[0][()] if np.ndim(p[0]) == 0 else p[0] for p in _phases_from(config, kin)]


def _intensity_from_phases(terms, mean_length, coherent=True):
    amps = []
    losses = []
    for psi, dk, length, lo in terms:
        # exp(-i (hi + lo)) to first order in the tiny lo
        a = (length / mean_length) * single_crystal_amplitude(dk, length) * np.exp(-1j * psi.real) * (1.0 - 1j * lo)
        amps.append(a)
        losses.append(psi.imag)
    diag = sum((a.real ** 2 + a.imag ** 2) for a in amps)
    if not coherent:
        return diag
    lossless = all(not np.any(loss) for loss in losses)
    if lossless:
        total = sum(amps)
        return total.real ** 2 + total.imag ** 2
    cross = np.zeros_like(diag)
    for n in range(len(amps)):
        for m in range(n + 1, len(amps)):
            t = np.exp(-np.abs(losses[m] - losses[n]))
            cross = cross + 2.0 * (amps[n] * np.conj(amps[m])).real * t
    return diag + cross


def _block(config: SuperlatticeConfig, lam_rows, theta, coherent):
    lam2, th2 = np.meshgrid(lam_rows, theta, indexing="ij")
    kin = _grid_kinematics(config, lam2, th2)
    terms = _phases_from(config, kin)
    mean_length = np.mean([c.length for c in config.crystals if c.enabled])
    inten = _intensity_from_phases(terms, mean_length, coherent)
    inten = np.where(kin.valid, inten, 0.0)
    return inten, kin.valid


def intensity_map(config: SuperlatticeConfig, grid: Grid, threads: int = 1, coherent: bool = True):
    """Unnormalized intensity on ``grid`` and the validity mask.

    Rows are processed in fixed chunks of ``ROW_CHUNK`` wavelengths, so the
    result does not depend on ``threads``.
    """
    if config.n_enabled == 0:
        raise PatternError("all crystals are disabled")
    lam = grid.signal_wavelengths
    theta = grid.external_angles
    chunks = [lam[i:i + ROW_CHUNK] for i in range(0, lam.size, ROW_CHUNK)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            blocks = list(pool.map(lambda rows: _block(config, rows, theta, coherent), chunks))
    else:
        blocks = [_block(config, rows, theta, coherent) for rows in chunks]
    inten = np.concatenate([b[0] for b in blocks], axis=0)
    valid = np.concatenate([b[1] for b in blocks], axis=0)
    return inten, valid


def normalized(grid: Grid, raw: np.ndarray, valid=None) -> InterferencePattern:
    peak = float(np.max(raw)) if raw.size else 0.0
    inten = raw / peak if peak > 0 else np.zeros_like(raw)
    return InterferencePattern(grid.signal_wavelengths.copy(), grid.external_angles.copy(),
                               inten, peak, valid)


def pattern(config: SuperlatticeConfig, grid: Grid, threads: int = 1, coherent: bool = True) -> InterferencePattern:
    """Signal intensity over (wavelength, external angle), normalized to its maximum.

    ``coherent=False`` returns the incoherent sum of single-crystal rates,
    i.e. the fringe-free envelope used as the visibility reference.
    """
    raw, valid = intensity_map(config, grid, threads=threads, coherent=coherent)
    return normalized(grid, raw, valid)
