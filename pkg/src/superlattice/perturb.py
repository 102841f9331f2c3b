"""
Tolerance Monte Carlo over crystal orientation, crystal length and gap length.

Each realization draws one standardized variate per crystal (angle, length)
and per gap from a Philox stream keyed by ``seed``; sample ``i`` uses the
stream jumped ``i`` times, so realizations are addressable independently
and the same seed gives common random numbers for every tolerance level.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .interference import Grid, InterferencePattern, SuperlatticeConfig, intensity_map, normalized

DISTRIBUTIONS = ("uniform", "gaussian")


@dataclass(frozen=True)
class PerturbationSpec:
    """Half-widths of the per-element tolerances.

    For ``gaussian`` the half-width is one standard deviation.
    """

    cut_angle_tolerance: float = 0.0
    crystal_length_tolerance: float = 0.0
    gap_length_tolerance: float = 0.0
    distribution: str = "uniform"
    samples: int = 1
    seed: int = 0

    def __post_init__(self):
        if min(self.cut_angle_tolerance, self.crystal_length_tolerance, self.gap_length_tolerance) < 0:
            raise ValueError("tolerances must be non-negative")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f"distribution must be one of {DISTRIBUTIONS}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def _variates(rng: np.random.Generator, size: int, distribution: str) -> np.ndarray:
    if distribution == "uniform":
        return rng.uniform(-1.0, 1.0, size)
    return rng.standard_normal(size)


def sample_stream(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed).jumped(index))


def sample_configs(base: SuperlatticeConfig, spec: PerturbationSpec) -> list[SuperlatticeConfig]:
    """``spec.samples`` perturbed copies of ``base``.

    Draws are made even for zero tolerances so that runs differing only in
    tolerance share their random numbers.
    """
    n_c, n_g = len(base.crystals), len(base.gaps)
    out = []
    for i in range(spec.samples):
        rng = sample_stream(spec.seed, i)
        u_angle = _variates(rng, n_c, spec.distribution)
        u_len = _variates(rng, n_c, spec.distribution)
        u_gap = _variates(rng, n_g, spec.distribution)
        crystals = tuple(
            replace(c,
                    cut_angle_offset=c.cut_angle_offset + spec.cut_angle_tolerance * u_angle[k],
                    length=c.length + spec.crystal_length_tolerance * u_len[k])
            for k, c in enumerate(base.crystals)
        )
        gaps = tuple(
            replace(g, length=max(g.length + spec.gap_length_tolerance * u_gap[k], 0.0))
            for k, g in enumerate(base.gaps)
        )
        out.append(replace(base, crystals=crystals, gaps=gaps))
    return out


class _PairwiseSum:
    """Streaming pairwise summation; the result depends only on insertion order."""

    def __init__(self):
        self._stack = []  # (level, partial)

    def add(self, value):
        level = 0
        while self._stack and self._stack[-1][0] == level:
            _, prev = self._stack.pop()
            value = prev + value
            level += 1
        self._stack.append((level, value))

    def total(self):
        if not self._stack:
            raise ValueError("nothing to sum")
        acc = self._stack[-1][1]
        for _, partial in reversed(self._stack[:-1]):
            acc = partial + acc
        return acc


def ensemble_pattern(samples: list[SuperlatticeConfig], grid: Grid, threads: int = 1,
                     coherent: bool = True) -> InterferencePattern:
    """Mean of the unnormalized per-realization intensities, then normalized."""
    if not samples:
        raise ValueError("ensemble needs at least one sample")
    acc = _PairwiseSum()
    valid = None

    def run(cfg):
        return intensity_map(cfg, grid, threads=1, coherent=coherent)

    if threads > 1 and len(samples) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = pool.map(run, samples)
            for raw, ok in results:
                acc.add(raw)
                valid = ok if valid is None else valid & ok
    else:
        for cfg in samples:
            raw, ok = run(cfg)
            acc.add(raw)
            valid = ok if valid is None else valid & ok
    mean = acc.total() / len(samples)
    return normalized(grid, mean, valid)
