"""
Observables extracted from interference patterns.

Fringe width follows the max-to-nearest-minimum convention: for N crystals
the principal maxima sit at phi = 2 pi m and the closest zeros at
phi = 2 pi m +- 2 pi / N, so widths scale as 1/N in phi.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import find_peaks

from .interference import InterferencePattern, pattern

DEFAULT_WINDOW = (np.deg2rad(0.2), np.deg2rad(0.8))
PROMINENCE_FLOOR = 0.01
PRINCIPAL_RATIO = 0.3


class MetricsUnavailable(ValueError):
    """Raised when a cross-section has no usable fringes."""


class FitError(RuntimeError):
    pass


@dataclass
class CrossSection:
    center_wavelength: float
    averaging_bandwidth: float
    angles: np.ndarray
    intensity: np.ndarray

    def __post_init__(self):
        self.angles = np.asarray(self.angles, dtype=float)
        self.intensity = np.asarray(self.intensity, dtype=float)
        if self.angles.shape != self.intensity.shape:
            raise ValueError("angle axis and intensity must have the same length")


@dataclass
class FringeMetrics:
    peak_angles: np.ndarray
    widths: np.ndarray
    visibility: float
    mean_width: float


@dataclass(frozen=True)
class PhaseShift:
    value: float
    uncertainty: float


def cross_section(pat: InterferencePattern, center_wavelength: float, bandwidth: float = 0.0) -> CrossSection:
    """Mean of the pattern rows within +-bandwidth/2 of ``center_wavelength``, renormalized.

    A bandwidth no wider than one grid step selects the nearest row.
    """
    lam = pat.signal_wavelengths
    if not lam[0] - 0.5 * bandwidth <= center_wavelength <= lam[-1] + 0.5 * bandwidth:
        raise MetricsUnavailable(f"centre {center_wavelength * 1e9:.3f} nm outside the pattern band")
    step = np.min(np.diff(lam)) if lam.size > 1 else np.inf
    if bandwidth <= step:
        rows = [int(np.argmin(np.abs(lam - center_wavelength)))]
    else:
        tol = 1e-9 * step
        rows = np.nonzero(np.abs(lam - center_wavelength) <= 0.5 * bandwidth + tol)[0]
        if rows.size == 0:
            raise MetricsUnavailable("no pattern rows inside the averaging band")
    avg = np.mean(pat.intensity[rows], axis=0)
    peak = avg.max()
    if peak > 0:
        avg = avg / peak
    return CrossSection(center_wavelength, bandwidth, pat.external_angles.copy(), avg)


def _parabolic(x, y, i):
    """Vertex of the parabola through samples i-1, i, i+1."""
    if i <= 0 or i >= len(y) - 1:
        return x[i]
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    denom = y0 - 2 * y1 + y2
    if denom == 0:
        return x[i]
    delta = 0.5 * (y0 - y2) / denom
    delta = float(np.clip(delta, -1.0, 1.0))
    h = x[i + 1] - x[i] if delta > 0 else x[i] - x[i - 1]
    return x[i] + delta * h


def _descend(y, i, step):
    j = i
    while 0 <= j + step < len(y) and y[j + step] <= y[j]:
        j += step
    if j == i or j == 0 or j == len(y) - 1:
        return None
    return j


def _principal(peaks, heights, ratio):
    """Drop subsidiary maxima: a peak below ``ratio`` times an adjacent peak is removed."""
    keep = list(range(len(peaks)))
    changed = True
    while changed and len(keep) > 1:
        changed = False
        survivors = []
        for j, k in enumerate(keep):
            neighbours = []
            if j > 0:
                neighbours.append(heights[keep[j - 1]])
            if j < len(keep) - 1:
                neighbours.append(heights[keep[j + 1]])
            if neighbours and heights[k] < ratio * max(neighbours):
                changed = True
            else:
                survivors.append(k)
        keep = survivors
    return peaks[keep]


def extrema(section: CrossSection, prominence: float = PROMINENCE_FLOOR,
            principal_ratio: float = PRINCIPAL_RATIO):
    """Indices of principal maxima and of all minima above the prominence floor."""
    y = section.intensity
    floor = prominence * (y.max() - y.min())
    if floor <= 0:
        return np.array([], dtype=int), np.array([], dtype=int)
    peaks, _ = find_peaks(y, prominence=floor)
    minima, _ = find_peaks(-y, prominence=floor)
    if peaks.size:
        peaks = _principal(peaks, y[peaks], principal_ratio)
    return peaks, minima


def window_mask(angles, window=DEFAULT_WINDOW):
    lo, hi = window
    a = np.abs(angles)
    return (a >= lo) & (a <= hi)


def fringe_metrics(section: CrossSection, window=DEFAULT_WINDOW, prominence: float = PROMINENCE_FLOOR,
                   principal_ratio: float = PRINCIPAL_RATIO) -> FringeMetrics:
    """Principal peak positions, max-to-nearest-minimum widths and window visibility.

    Extremum positions are refined by 3-point parabolic interpolation.
    ``mean_width`` averages peaks whose |angle| falls inside ``window``.
    """
    x, y = section.angles, section.intensity
    if x.size < 3:
        raise MetricsUnavailable("cross-section needs at least 3 samples")
    peaks, minima = extrema(section, prominence, principal_ratio)
    if peaks.size == 0 or minima.size == 0:
        raise MetricsUnavailable("no interior extrema")
    peak_pos = np.array([_parabolic(x, y, i) for i in peaks])
    widths = []
    for i, p in zip(peaks, peak_pos):
        # nearest minimum: first local minimum reached walking downhill on either side
        sides = [j for j in (_descend(y, i, -1), _descend(y, i, +1)) if j is not None]
        if not sides:
            raise MetricsUnavailable("peak has no neighbouring minimum")
        widths.append(min(abs(_parabolic(x, y, j) - p) for j in sides))
    widths = np.array(widths)

    in_window = window_mask(peak_pos, window)
    if not np.any(in_window):
        raise MetricsUnavailable("no fringe maxima inside the analysis window")
    order = np.argsort(peak_pos)
    return FringeMetrics(
        peak_angles=peak_pos[order],
        widths=widths[order],
        visibility=visibility(section, window),
        mean_width=float(np.mean(widths[in_window])),
    )


def visibility(section: CrossSection, window=DEFAULT_WINDOW, envelope: CrossSection | None = None) -> float:
    """(I_max - I_min) / (I_max + I_min) over the samples with |angle| in ``window``.

    With ``envelope`` (the incoherent single-crystal sum on the same axis)
    the section is divided by it first, so the smooth emission envelope does
    not count as fringe contrast.
    """
    y = section.intensity
    if envelope is not None:
        if envelope.intensity.shape != y.shape:
            raise ValueError("envelope must share the angle axis")
        with np.errstate(invalid="ignore", divide="ignore"):
            y = np.where(envelope.intensity > 0, y / envelope.intensity, np.nan)
    sel = window_mask(section.angles, window) & np.isfinite(y)
    if not np.any(sel):
        raise MetricsUnavailable("analysis window is empty")
    hi, lo = np.max(y[sel]), np.min(y[sel])
    if hi + lo == 0:
        return 0.0
    return float((hi - lo) / (hi + lo))


def _envelope_normalized(section: CrossSection, envelope: CrossSection | None) -> CrossSection:
    if envelope is None:
        return section
    if envelope.intensity.shape != section.intensity.shape:
        raise ValueError("envelope must share the angle axis")
    with np.errstate(invalid="ignore", divide="ignore"):
        y = np.where(envelope.intensity > 0, section.intensity / envelope.intensity, 0.0)
    return CrossSection(section.center_wavelength, section.averaging_bandwidth, section.angles, y)


def fringe_visibility(section: CrossSection, window=DEFAULT_WINDOW, envelope: CrossSection | None = None,
                      prominence: float = PROMINENCE_FLOOR) -> float:
    """Mean contrast of each principal fringe against its nearest minimum.

    Unlike :func:`visibility`, which takes the extreme values of the whole
    window, a single deep minimum anywhere in the window does not hide a
    loss of contrast in the other fringes.
    """
    sec = _envelope_normalized(section, envelope)
    y = sec.intensity
    peaks, _ = extrema(sec, prominence)
    contrast = []
    for i in peaks:
        if not window_mask(sec.angles[i], window):
            continue
        sides = [j for j in (_descend(y, i, -1), _descend(y, i, +1)) if j is not None]
        if not sides:
            continue
        lo = min(y[j] for j in sides)
        contrast.append((y[i] - lo) / (y[i] + lo))
    if not contrast:
        raise MetricsUnavailable("no fringes with a neighbouring minimum inside the window")
    return float(np.mean(contrast))


def width_ratios(sections: dict, window=DEFAULT_WINDOW) -> list[tuple[int, float]]:
    """(N, width_2 / width_N) for sections keyed by crystal count, reference N = 2."""
    if 2 not in sections:
        raise ValueError("width ratios need an N = 2 reference section")
    ref = fringe_metrics(sections[2], window).mean_width
    return [(n, ref / fringe_metrics(sections[n], window).mean_width) for n in sorted(sections)]


def width_ratio_curve(configs, grid, center_wavelength: float, bandwidth: float = 0.0,
                      window=DEFAULT_WINDOW, threads: int = 1) -> list[tuple[int, float]]:
    """Fringe-width ratio against the two-crystal lattice for each config.

    Configs must share geometry apart from the crystal count; N is the
    number of enabled crystals.
    """
    sections = {}
    for cfg in configs:
        sections[cfg.n_enabled] = cross_section(pattern(cfg, grid, threads=threads), center_wavelength, bandwidth)
    return width_ratios(sections, window)


def slope_gain(section_a: CrossSection, section_b: CrossSection, window=DEFAULT_WINDOW) -> float:
    """Ratio of the steepest normalized fringe slope of ``b`` to that of ``a`` inside ``window``."""
    def steepest(sec):
        d = np.gradient(sec.intensity / sec.intensity.max(), sec.angles)
        sel = window_mask(sec.angles, window)
        if not np.any(sel):
            raise MetricsUnavailable("analysis window is empty")
        return np.max(np.abs(d[sel]))

    return float(steepest(section_b) / steepest(section_a))


# --- fringe-phase fitting -------------------------------------------------------

def _array_factor(phi, n):
    # (sin(N phi/2) / (N sin(phi/2)))^2, 1 at phi = 2 pi m
    half = 0.5 * phi
    s = np.sin(half)
    small = np.abs(s) < 1e-12
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(small, 1.0, np.sin(n * half) / (n * np.where(small, 1.0, s)))
    return r * r


def _design(u, f):
    # I = (a0 + a1 u + a2 u^2) + (b0 + b1 u + b2 u^2) F(phi),  u = theta^2 (scaled)
    return np.column_stack([np.ones_like(u), u, u * u, f, u * f, u * u * f])


def _linear_fit(params, u, y, n, fixed):
    phi0 = params[0]
    c2, c4 = (params[1], params[2]) if fixed is None else fixed
    f = _array_factor(phi0 + c2 * u + c4 * u * u, n)
    a = _design(u, f)
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    return a, coef


def _residual(params, u, y, n, fixed):
    a, coef = _linear_fit(params, u, y, n, fixed)
    return a @ coef - y


def _scan_cost(params, u, y, n, fixed):
    a, coef = _linear_fit(params, u, y, n, fixed)
    # fringe term must add intensity; a negative amplitude would fit inverted fringes
    amplitude = coef[3] + coef[4] * u + coef[5] * u * u
    if np.mean(amplitude) <= 0:
        return np.inf
    r = a @ coef - y
    return float(r @ r)


def _initial_curvature(section: CrossSection, u):
    peaks, _ = extrema(section)
    pos = np.sort(np.abs(section.angles[peaks]))
    pos = np.unique(np.round(pos, 12))
    pos = pos[pos > 0]
    if pos.size < 3:
        raise FitError("too few fringes to seed the phase fit")
    scale = section.angles.max() ** 2
    uu = pos ** 2 / scale
    spacing = np.median(np.diff(uu))
    c2 = 2 * np.pi / spacing
    phi0 = np.mod(-c2 * uu[0], 2 * np.pi)
    return c2, phi0


def _scan_phase(u, y, n, c2, c4):
    grid = np.linspace(0, 2 * np.pi, 720, endpoint=False)
    cost = [_scan_cost([p], u, y, n, (c2, c4)) for p in grid]
    return grid[int(np.argmin(cost))]


def fit_fringe_phase(section: CrossSection, n_crystals: int, curvature=None):
    """Fit ``section`` to a multi-source fringe model with phi = phi0 + c2 u + c4 u^2.

    ``u`` is theta^2 scaled to 1 at the edge of the axis; the emission
    envelope and background are smooth polynomials in ``u``. With
    ``curvature = (c2, c4)`` only ``phi0`` is fitted. Returns
    ``(phi0, sigma_phi0, (c2, c4), rms)``.
    """
    x = section.angles
    y = section.intensity / section.intensity.max()
    u = x ** 2 / np.max(x ** 2)
    if curvature is None:
        c2, phi0 = _initial_curvature(section, u)
        best = None
        for c2_try in c2 * np.array([0.97, 0.985, 1.0, 1.015, 1.03]):
            p0 = _scan_phase(u, y, n_crystals, c2_try, 0.0)
            res = least_squares(_residual, [p0, c2_try, 0.0], args=(u, y, n_crystals, None), method="lm")
            if best is None or res.cost < best.cost:
                best = res
        c2, c4 = best.x[1], best.x[2]
    else:
        c2, c4 = curvature
    p0 = _scan_phase(u, y, n_crystals, c2, c4)
    res = least_squares(_residual, [p0], args=(u, y, n_crystals, (c2, c4)), method="lm")
    if not res.success:
        raise FitError(res.message)
    dof = max(y.size - 7, 1)
    s2 = 2 * res.cost / dof
    jtj = res.jac.T @ res.jac
    sigma = float(np.sqrt(s2 / jtj[0, 0])) if jtj[0, 0] > 0 else np.inf
    rms = float(np.sqrt(2 * res.cost / y.size))
    return float(np.mod(res.x[0], 2 * np.pi)), sigma, (float(c2), float(c4)), rms


def _wrap(angle):
    w = np.mod(angle + np.pi, 2 * np.pi) - np.pi
    return np.pi if w == -np.pi else float(w)


def _infer_crystal_count(section: CrossSection) -> int:
    best_n, best_rms = None, np.inf
    for n in range(2, 9):
        try:
            rms = fit_fringe_phase(section, n)[3]
        except FitError:
            continue
        if rms < best_rms - 1e-9:
            best_n, best_rms = n, rms
    if best_n is None:
        raise FitError("could not fit the reference section for any crystal count")
    return best_n


def phase_shift(reference: CrossSection, sample: CrossSection, n_crystals: int | None = None) -> PhaseShift:
    """Fringe-phase displacement of ``sample`` relative to ``reference`` in (-pi, pi].

    Both sections are fitted with the fringe model; the phase curvature is
    taken from the reference so only the constant phase differs. The value
    is negative when the sample adds optical path to the idler.
    """
    if reference.angles.shape != sample.angles.shape or not np.allclose(reference.angles, sample.angles):
        raise ValueError("sections must share the angle axis")
    n = n_crystals or _infer_crystal_count(reference)
    phi_ref, s_ref, curvature, _ = fit_fringe_phase(reference, n)
    phi_s, s_s, _, _ = fit_fringe_phase(sample, n, curvature)
    return PhaseShift(_wrap(phi_s - phi_ref), float(np.hypot(s_ref, s_s)))
