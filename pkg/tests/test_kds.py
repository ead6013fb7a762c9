import math

import numpy as np
import pytest

from ctslim import (
    AreaProfile,
    DensityModel,
    KdsConfig,
    SampleSet,
    SelectionWindow,
    estimate_density,
    kds_sample,
    percentile,
    random_sample,
    scott_bandwidth,
    split_window,
    systematic_sample,
    window_density,
)
from ctslim.errors import AllZeroWeights, InvalidProbability, NoData

# hand-derived via sigma = sqrt(sum((x-49.5)^2)/100) = sqrt(833.25),
# h = sigma * 100**(-1/5)
SCOTT_H_0_99 = 11.491789471697707


def naive_density(positions, weights, h, grid):
    """Double-loop weighted Gaussian sum, then trapezoid renormalization."""
    out = np.zeros(len(grid))
    wsum = float(sum(weights))
    for gi, x in enumerate(grid):
        total = 0.0
        for xi, wi in zip(positions, weights):
            u = (x - xi) / h
            total += wi * math.exp(-0.5 * u * u) / math.sqrt(2 * math.pi)
        out[gi] = total / (h * wsum)
    return out / np.trapezoid(out, grid)


def make_window(s, e):
    return SelectionWindow(s=s, e=e, area_sum=0, area_fraction=0.0,
                           alpha_satisfied=False)


# --- scott_bandwidth --------------------------------------------------------

def test_scott_single_position_fallback():
    assert scott_bandwidth([5.0], [3.0]) == 1.0


def test_scott_equal_weights_0_to_99():
    h = scott_bandwidth(np.arange(100), np.ones(100))
    assert h == pytest.approx(SCOTT_H_0_99, abs=1e-12)


def test_scott_weight_scale_invariance():
    rng = np.random.default_rng(40)
    x = rng.uniform(0, 50, size=30)
    w = rng.uniform(0.1, 5.0, size=30)
    assert scott_bandwidth(x, w) == pytest.approx(scott_bandwidth(x, w * 7.25), rel=1e-12)


def test_scott_errors():
    with pytest.raises(NoData):
        scott_bandwidth([], [])
    with pytest.raises(AllZeroWeights):
        scott_bandwidth([1.0, 2.0], [0.0, 0.0])


# --- estimate_density -------------------------------------------------------

def test_density_single_kernel_bump():
    model = estimate_density([6.0], [2.0], h=1.5, grid_size=101, bounds=(0.0, 12.0))
    peak = model.grid[np.argmax(model.density)]
    assert abs(peak - 6.0) <= (model.grid[1] - model.grid[0])


def test_density_uniform_weights_approximately_flat():
    positions = np.arange(100, dtype=float)
    weights = np.ones(100)
    h = scott_bandwidth(positions, weights)
    model = estimate_density(positions, weights, h, grid_size=100)
    inner = model.density[25:75]  # away from boundary falloff
    assert inner.max() / inner.min() <= 1.2


def test_density_matches_naive_double_loop():
    rng = np.random.default_rng(41)
    for _ in range(5):
        n = int(rng.integers(2, 40))
        positions = np.sort(rng.uniform(0, 60, size=n))
        positions[-1] = positions[0] + max(positions[-1] - positions[0], 1.0)
        weights = rng.uniform(0.0, 10.0, size=n)
        weights[0] = max(weights[0], 0.1)
        h = rng.uniform(0.5, 8.0)
        model = estimate_density(positions, weights, h, grid_size=64)
        expected = naive_density(positions, weights, h, model.grid)
        assert np.allclose(model.density, expected, atol=1e-9)


def test_density_normalization_and_cdf():
    rng = np.random.default_rng(42)
    positions = rng.uniform(0, 30, size=20)
    positions[:2] = (0.0, 30.0)
    weights = rng.uniform(0.5, 3.0, size=20)
    model = estimate_density(positions, weights, h=2.0, grid_size=100)
    assert np.trapezoid(model.density, model.grid) == pytest.approx(1.0, abs=1e-3)
    assert np.all(np.diff(model.cdf) >= 0)
    assert model.cdf[0] == 0.0 and model.cdf[-1] == pytest.approx(1.0, abs=1e-12)


def test_density_errors():
    with pytest.raises(NoData):
        estimate_density([], [], h=1.0)
    with pytest.raises(AllZeroWeights):
        estimate_density([1.0, 2.0], [0.0, 0.0], h=1.0)
    with pytest.raises(ValueError):
        estimate_density([1.0, 2.0], [1.0, 1.0], h=0.0)
    with pytest.raises(ValueError):
        estimate_density([3.0, 3.0], [1.0, 1.0], h=1.0)  # zero-width bounds


# --- percentile -------------------------------------------------------------

def _flat_model(s=0.0, e=9.0, grid_size=100):
    grid = np.linspace(s, e, grid_size)
    density = np.full(grid_size, 1.0 / (e - s))
    cdf = (grid - s) / (e - s)
    return DensityModel(grid=grid, density=density, bandwidth=1.0, cdf=cdf)


def test_percentile_boundaries():
    model = _flat_model(3.0, 17.0)
    assert percentile(model, 0.0) == 3.0
    assert percentile(model, 1.0) == 17.0


def test_percentile_symmetric_median():
    model = estimate_density([10.0, 14.0], [1.0, 1.0], h=1.0, grid_size=101,
                             bounds=(4.0, 20.0))
    step = model.grid[1] - model.grid[0]
    assert abs(percentile(model, 0.5) - 12.0) <= step


def test_percentile_flat_closed_form():
    model = _flat_model(0.0, 9.0)
    step = model.grid[1] - model.grid[0]
    for p in np.linspace(0.05, 0.95, 10):
        assert abs(percentile(model, p) - 9.0 * p) <= step


def test_percentile_across_flat_cdf_gap():
    # bimodal density that vanishes mid-window (as KDE underflow produces);
    # inversion must stay monotone across the flat CDF run
    grid = np.linspace(0.0, 10.0, 201)
    density = np.where((grid < 3.0) | (grid > 7.0), 1.0, 0.0)
    density /= np.trapezoid(density, grid)
    steps = np.diff(grid) * (density[1:] + density[:-1]) / 2.0
    cdf = np.concatenate([[0.0], np.cumsum(steps)])
    cdf /= cdf[-1]
    model = DensityModel(grid=grid, density=density, bandwidth=1.0, cdf=cdf)
    values = [percentile(model, p) for p in np.linspace(0.0, 1.0, 41)]
    assert all(a <= b for a, b in zip(values, values[1:]))
    assert percentile(model, 0.5) <= 7.0  # plateau resolves to its left edge


def test_percentile_monotone_and_validated():
    model = estimate_density(np.arange(10.0), np.arange(10.0) + 1, h=1.3)
    values = [percentile(model, p) for p in np.linspace(0, 1, 21)]
    assert all(a <= b for a, b in zip(values, values[1:]))
    with pytest.raises(InvalidProbability):
        percentile(model, -0.01)
    with pytest.raises(InvalidProbability):
        percentile(model, 1.01)


# --- split_window -----------------------------------------------------------

def test_split_window_equal_halves():
    assert split_window(0, 9, [4.5]) == [(0, 4), (5, 9)]


def test_split_window_singletons_when_full():
    blocks = split_window(3, 8, [3.2, 4.9, 5.5, 6.8, 7.1])
    assert blocks == [(3, 3), (4, 4), (5, 5), (6, 6), (7, 7), (8, 8)]


def test_split_window_steals_for_empty_intervals():
    # cuts crowd the left edge; blocks must still partition without gaps
    blocks = split_window(0, 9, [0.1, 0.2, 0.3])
    assert blocks == [(0, 0), (1, 1), (2, 2), (3, 9)]
    flat = [i for lo, hi in blocks for i in range(lo, hi + 1)]
    assert flat == list(range(10))


def test_split_window_rejects_overfull():
    with pytest.raises(ValueError):
        split_window(0, 2, [0.5, 1.2, 2.1])


# --- kds_sample -------------------------------------------------------------

def _bump_profile(n=30, peak=15, width=2.0, scale=900):
    idx = np.arange(n, dtype=float)
    areas = np.round(scale * np.exp(-0.5 * ((idx - peak) / width) ** 2)).astype(int)
    return AreaProfile("bump", areas)


def test_kds_clamp_returns_all_indices():
    profile = _bump_profile(n=6)
    window = make_window(1, 4)
    out = kds_sample(profile, window, KdsConfig(num_samples=10), seed=0)
    assert out.indices == (1, 2, 3, 4)


def test_kds_one_sample_per_block():
    profile = _bump_profile(n=40, peak=22, width=5.0)
    window = make_window(2, 37)
    cfg = KdsConfig(num_samples=8)
    out = kds_sample(profile, window, cfg, seed=3)
    model = window_density(profile, window, cfg)
    cuts = [percentile(model, j / 8) for j in range(1, 8)]
    blocks = split_window(2, 37, cuts)
    for lo, hi in blocks:
        assert sum(1 for i in out.indices if lo <= i <= hi) == 1


def test_kds_deterministic_per_seed():
    profile = _bump_profile()
    window = make_window(0, 29)
    cfg = KdsConfig(num_samples=6)
    a = kds_sample(profile, window, cfg, seed=11)
    b = kds_sample(profile, window, cfg, seed=11)
    c = kds_sample(profile, window, cfg, seed=12)
    assert a.indices == b.indices
    assert a.indices != c.indices  # frozen seed pair known to differ


def test_kds_weight_scale_invariance():
    profile = _bump_profile()
    scaled = AreaProfile("bump", profile.areas * 4)  # power of two: exact fp
    window = make_window(0, 29)
    cfg = KdsConfig(num_samples=5)
    model_a = window_density(profile, window, cfg)
    model_b = window_density(scaled, window, cfg)
    assert np.array_equal(model_a.density, model_b.density)
    assert (kds_sample(profile, window, cfg, seed=7).indices
            == kds_sample(scaled, window, cfg, seed=7).indices)


def test_kds_zero_area_window_uniform_fallback():
    profile = AreaProfile("flat", np.zeros(12, dtype=int))
    window = make_window(0, 11)
    out = kds_sample(profile, window, KdsConfig(num_samples=4), seed=2)
    assert len(out.indices) == 4


def test_kds_modal_index_matches_profile_argmax():
    # Monte-Carlo check of density-proportional selection for m = 1
    profile = _bump_profile(n=31, peak=15, width=2.0)
    window = make_window(0, 30)
    cfg = KdsConfig(num_samples=1)
    counts = np.zeros(31, dtype=int)
    for seed in range(10_000):
        (idx,) = kds_sample(profile, window, cfg, seed=seed).indices
        counts[idx] += 1
    assert counts.argmax() == int(profile.areas.argmax()) == 15


# --- baselines --------------------------------------------------------------

def test_random_sample_clamp_and_missing_one():
    window = make_window(5, 14)
    full = random_sample(window, 20, seed=0, scan_id="s")
    assert full.indices == tuple(range(5, 15))
    nine = random_sample(window, 9, seed=0, scan_id="s")
    assert len(nine.indices) == 9
    assert len(set(range(5, 15)) - set(nine.indices)) == 1


def test_random_sample_deterministic():
    window = make_window(0, 49)
    a = random_sample(window, 8, seed=123, scan_id="x")
    b = random_sample(window, 8, seed=123, scan_id="x")
    assert a.indices == b.indices


def test_random_sample_distinct_substreams_per_scan():
    window = make_window(0, 199)
    a = random_sample(window, 10, seed=5, scan_id="scan_a")
    b = random_sample(window, 10, seed=5, scan_id="scan_b")
    assert a.indices != b.indices


def test_systematic_full_coverage():
    window = make_window(2, 7)
    out = systematic_sample(window, 6, seed=1, scan_id="s")
    assert out.indices == (2, 3, 4, 5, 6, 7)


def test_systematic_two_halves():
    window = make_window(0, 9)
    for seed in range(20):
        out = systematic_sample(window, 2, seed=seed, scan_id="s")
        lo, hi = out.indices
        assert 0 <= lo <= 4 and 5 <= hi <= 9


def test_systematic_deterministic():
    window = make_window(0, 39)
    a = systematic_sample(window, 7, seed=9, scan_id="s")
    b = systematic_sample(window, 7, seed=9, scan_id="s")
    assert a.indices == b.indices


def test_systematic_one_sample_per_equal_interval():
    rng = np.random.default_rng(77)
    for trial in range(50):
        s = int(rng.integers(0, 10))
        e = s + int(rng.integers(4, 40))
        m = int(rng.integers(2, e - s + 2))
        out = systematic_sample(make_window(s, e), m, seed=trial, scan_id="s")
        size = min(m, e - s + 1)
        cuts = [s + (e - s) * j / size for j in range(1, size)]
        blocks = split_window(s, e, cuts)
        for lo, hi in blocks:
            assert sum(1 for i in out.indices if lo <= i <= hi) == 1


@pytest.mark.parametrize("strategy_call", [
    lambda w, seed: random_sample(w, 6, seed, scan_id="s"),
    lambda w, seed: systematic_sample(w, 6, seed, scan_id="s"),
    lambda w, seed: kds_sample(_bump_profile(n=25), w, KdsConfig(num_samples=6), seed),
])
def test_all_strategies_sorted_unique_in_range(strategy_call):
    window = make_window(3, 21)
    for seed in range(25):
        out = strategy_call(window, seed)
        assert list(out.indices) == sorted(set(out.indices))
        assert all(3 <= i <= 21 for i in out.indices)
        assert len(out.indices) == 6


def test_sample_set_validation():
    window = make_window(0, 9)
    with pytest.raises(ValueError):
        SampleSet("s", window, (3, 3, 4), "kds", 0)
    with pytest.raises(ValueError):
        SampleSet("s", window, (8, 10), "kds", 0)
    with pytest.raises(ValueError):
        SampleSet("s", window, (1, 2), "bogus", 0)
