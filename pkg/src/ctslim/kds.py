"""Density-aware slice sampling within a selection window.

The slice positions of a window are treated as a 1-D random variable with
kernel weights proportional to each slice's cavity area.  A weighted
Gaussian KDE over that axis yields a density and CDF; cutting the window
at CDF percentiles produces sub-intervals of equal probability mass, and
one slice is drawn per sub-interval with probability proportional to the
density at each candidate position.  High-density (large-area) regions
therefore receive short sub-intervals and concentrated draws, while every
part of the window still contributes a sample.

Two baselines mirror the same interface: plain uniform sampling over the
window, and systematic sampling over equal-length sub-intervals.

All sampling is reproducible: draws come from a named generator seeded by
``(seed, scan_id, strategy)``, so per-scan parallelism cannot reorder or
change outputs.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AllZeroWeights,
    EmptyWindow,
    InvalidProbability,
    NoData,
)
from .slices import AreaProfile, SelectionWindow

STRATEGIES = ("kds", "random", "systematic")

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class KdsConfig:
    """Sample count and density-estimation resolution.

    ``grid_size`` sets how many evaluation points the density and CDF are
    tabulated on; 100 gives a smooth estimate at negligible cost.
    """

    num_samples: int = 8
    grid_size: int = 100
    bandwidth_rule: str = "scott"

    def __post_init__(self):
        if self.num_samples < 1:
            raise ValueError("num_samples must be >= 1")
        if self.grid_size < 2:
            raise ValueError("grid_size must be >= 2")
        if self.bandwidth_rule != "scott":
            raise ValueError(f"unknown bandwidth rule {self.bandwidth_rule!r}")


@dataclass(frozen=True, eq=False)
class DensityModel:
    """Tabulated weighted KDE over a slice-index interval.

    ``density`` integrates (trapezoidally) to 1 over ``grid``; ``cdf`` is
    its running trapezoidal integral, scaled to end at exactly 1.
    """

    grid: np.ndarray
    density: np.ndarray
    bandwidth: float
    cdf: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=np.float64)
        density = np.asarray(self.density, dtype=np.float64)
        cdf = np.asarray(self.cdf, dtype=np.float64)
        if grid.ndim != 1 or grid.size < 2:
            raise ValueError("grid must be 1-D with at least 2 points")
        if density.shape != grid.shape or cdf.shape != grid.shape:
            raise ValueError("density and cdf must match the grid shape")
        if density.min() < 0:
            raise ValueError("density must be non-negative")
        if abs(np.trapezoid(density, grid) - 1.0) > 1e-3:
            raise ValueError("density must integrate to 1 over the grid")
        if np.any(np.diff(cdf) < 0) or cdf[0] < 0 or abs(cdf[-1] - 1.0) > 1e-12:
            raise ValueError("cdf must be non-decreasing from >=0 to 1")
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        for name, arr in (("grid", grid), ("density", density), ("cdf", cdf)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def density_at(self, positions) -> np.ndarray:
        """Linear interpolation of the tabulated density."""
        return np.interp(np.asarray(positions, dtype=np.float64), self.grid, self.density)


@dataclass(frozen=True)
class SampleSet:
    """Sorted, duplicate-free slice positions drawn from a window."""

    scan_id: str
    window: SelectionWindow
    indices: tuple[int, ...]
    strategy: str
    seed: int

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        idx = tuple(int(i) for i in self.indices)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("indices must be strictly increasing")
        if idx and (idx[0] < self.window.s or idx[-1] > self.window.e):
            raise ValueError("indices must lie within the window")
        object.__setattr__(self, "indices", idx)


def scott_bandwidth(positions, weights) -> float:
    """Scott's-rule bandwidth extended to weighted samples.

    ``h = sigma_w * n_eff**(-1/5)`` with ``sigma_w`` the weighted
    (population) standard deviation of the positions and
    ``n_eff = (sum w)^2 / sum(w^2)`` the effective sample size.  A zero
    spread (single position, or all weight on one spot) falls back to
    ``h = 1.0`` index unit.
    """
    x = np.asarray(positions, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if x.size == 0:
        raise NoData("no positions")
    if x.shape != w.shape:
        raise ValueError("positions and weights must have the same length")
    if w.min() < 0:
        raise ValueError("weights must be non-negative")
    total = w.sum()
    if total <= 0:
        raise AllZeroWeights("weights sum to zero")
    mean = np.average(x, weights=w)
    var = np.average((x - mean) ** 2, weights=w)
    sigma = math.sqrt(var)
    if sigma == 0.0:
        return 1.0
    n_eff = total * total / float((w * w).sum())
    return sigma * n_eff ** (-0.2)


def estimate_density(positions, weights, h: float, grid_size: int = 100,
                     bounds: tuple[float, float] | None = None) -> DensityModel:
    """Weighted Gaussian KDE tabulated on an even grid.

    The raw estimate is ``f(x) = sum_i w_i * phi((x - x_i)/h) / (h * sum w)``
    with ``phi`` the standard normal density; it is then renormalized so
    its trapezoidal integral over the grid is exactly 1 (the grid truncates
    the kernels' tails).  ``bounds`` defaults to the positions' extent.
    """
    x = np.asarray(positions, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if x.size == 0:
        raise NoData("no positions")
    if x.shape != w.shape:
        raise ValueError("positions and weights must have the same length")
    if w.min() < 0:
        raise ValueError("weights must be non-negative")
    if w.sum() <= 0:
        raise AllZeroWeights("weights sum to zero")
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    lo, hi = bounds if bounds is not None else (float(x.min()), float(x.max()))
    if not hi > lo:
        raise ValueError(f"degenerate grid bounds ({lo}, {hi})")

    grid = np.linspace(lo, hi, grid_size)
    u = (grid[:, None] - x[None, :]) / h
    density = (np.exp(-0.5 * u * u) / _SQRT_2PI * w[None, :]).sum(axis=1)
    density /= h * w.sum()
    density /= np.trapezoid(density, grid)

    steps = np.diff(grid) * (density[1:] + density[:-1]) / 2.0
    cdf = np.concatenate([[0.0], np.cumsum(steps)])
    cdf /= cdf[-1]
    return DensityModel(grid=grid, density=density, bandwidth=float(h), cdf=cdf)


def percentile(model: DensityModel, p: float) -> float:
    """Position where the model's CDF reaches ``p`` (piecewise-linear inverse).

    ``p = 0`` maps to the grid start and ``p = 1`` to the grid end; the
    result is monotone in ``p``.
    """
    if not 0.0 <= p <= 1.0:
        raise InvalidProbability(f"p={p} outside [0, 1]")
    grid, cdf = model.grid, model.cdf
    if p <= cdf[0]:
        return float(grid[0])
    if p >= 1.0:
        return float(grid[-1])
    i = int(np.searchsorted(cdf, p, side="left"))
    i = min(max(i, 1), grid.size - 1)
    c0, c1 = cdf[i - 1], cdf[i]
    if c1 == c0:
        return float(grid[i])
    frac = (p - c0) / (c1 - c0)
    return float(grid[i - 1] + frac * (grid[i] - grid[i - 1]))


def split_window(s: int, e: int, cuts) -> list[tuple[int, int]]:
    """Partition the integers [s, e] into contiguous non-empty blocks.

    ``cuts`` are len(cuts)+1-interval boundaries in position units (e.g.
    CDF percentiles).  An integer belongs to block j when it lies at or
    below cut j and above cut j-1.  Blocks left empty by the cuts steal
    the nearest index from an adjacent block: cumulative cut counts are
    pushed apart by a forward max pass and a backward min pass, which
    moves each boundary the minimum number of indices needed.  Requires
    ``e - s + 1 >= len(cuts) + 1``.
    """
    count = e - s + 1
    parts = len(cuts) + 1
    if count < parts:
        raise ValueError(f"cannot split {count} indices into {parts} blocks")
    # integers in [s, e] lying at or below each cut
    t = [min(count, max(0, int(math.floor(c)) - s + 1)) for c in cuts]
    for j in range(len(t)):
        t[j] = max(t[j], (t[j - 1] if j else 0) + 1)
    t.append(count)
    for j in range(len(t) - 2, -1, -1):
        t[j] = min(t[j], t[j + 1] - 1)
    bounds = [0] + t
    return [(s + bounds[j], s + bounds[j + 1] - 1) for j in range(parts)]


def _substream(seed: int, scan_id: str, strategy: str) -> np.random.Generator:
    """Deterministic per-(seed, scan, strategy) generator."""
    scan_key = int.from_bytes(
        hashlib.blake2b(scan_id.encode("utf-8"), digest_size=8).digest(), "big"
    )
    entropy = [seed & 0xFFFFFFFFFFFFFFFF, scan_key, STRATEGIES.index(strategy)]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _clamped_size(window: SelectionWindow, m: int) -> int:
    count = window.num_slices
    if count < 1:
        raise EmptyWindow(f"window [{window.s}, {window.e}] holds no slices")
    if m < 1:
        raise ValueError("sample count must be >= 1")
    return min(m, count)


def window_density(profile: AreaProfile, window: SelectionWindow,
                   cfg: KdsConfig) -> DensityModel:
    """KDE over the window's positions weighted by per-slice areas.

    A zero-area window falls back to uniform weights so sampling always
    succeeds.
    """
    positions = np.arange(window.s, window.e + 1, dtype=np.float64)
    weights = profile.areas[window.s:window.e + 1].astype(np.float64)
    if weights.sum() <= 0:
        weights = np.ones_like(positions)
    h = scott_bandwidth(positions, weights)
    return estimate_density(positions, weights, h, cfg.grid_size,
                            bounds=(float(window.s), float(window.e)))


def kds_sample(profile: AreaProfile, window: SelectionWindow, cfg: KdsConfig,
               seed: int) -> SampleSet:
    """Draw ``min(num_samples, window size)`` slices, density-proportionally.

    The window is cut at the density model's ``j/m`` percentiles into
    ``m`` sub-intervals (equal probability mass), each contributing one
    draw weighted by the density at its candidate positions.
    """
    if window.e >= len(profile):
        raise ValueError("window exceeds the profile")
    m = _clamped_size(window, cfg.num_samples)
    if m == window.num_slices:
        indices = range(window.s, window.e + 1)
        return SampleSet(profile.scan_id, window, tuple(indices), "kds", seed)

    model = window_density(profile, window, cfg)
    cuts = [percentile(model, j / m) for j in range(1, m)]
    blocks = split_window(window.s, window.e, cuts)
    rng = _substream(seed, profile.scan_id, "kds")
    chosen = []
    for lo, hi in blocks:
        candidates = np.arange(lo, hi + 1)
        mass = model.density_at(candidates)
        total = mass.sum()
        if total > 0:
            probs = mass / total
        else:  # density underflow far from all kernels
            probs = np.full(candidates.size, 1.0 / candidates.size)
        chosen.append(int(rng.choice(candidates, p=probs)))
    return SampleSet(profile.scan_id, window, tuple(sorted(chosen)), "kds", seed)


def random_sample(window: SelectionWindow, m: int, seed: int,
                  scan_id: str = "") -> SampleSet:
    """Uniform sample without replacement over the whole window."""
    size = _clamped_size(window, m)
    rng = _substream(seed, scan_id, "random")
    chosen = rng.choice(np.arange(window.s, window.e + 1), size=size, replace=False)
    return SampleSet(scan_id, window, tuple(sorted(int(i) for i in chosen)),
                     "random", seed)


def systematic_sample(window: SelectionWindow, m: int, seed: int,
                      scan_id: str = "") -> SampleSet:
    """One uniform draw per equal-length sub-interval of the window."""
    size = _clamped_size(window, m)
    if size == window.num_slices:
        indices = range(window.s, window.e + 1)
        return SampleSet(scan_id, window, tuple(indices), "systematic", seed)
    span = window.e - window.s
    cuts = [window.s + span * j / size for j in range(1, size)]
    blocks = split_window(window.s, window.e, cuts)
    rng = _substream(seed, scan_id, "systematic")
    chosen = [int(rng.integers(lo, hi + 1)) for lo, hi in blocks]
    return SampleSet(scan_id, window, tuple(sorted(chosen)), "systematic", seed)
