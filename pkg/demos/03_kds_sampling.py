"""
Density-aware sampling vs the baselines
=======================================

Given a selection window and its per-slice areas, three strategies draw
the same number of slices:

* ``random``     - uniform over the window; can miss whole regions.
* ``systematic`` - one draw per equal-length sub-interval; covers the
                   window but ignores where the tissue actually is.
* ``kds``        - one draw per equal-probability-mass sub-interval of a
                   weighted KDE, biased toward high-density slices while
                   still covering the window.

This demo runs all three on a bimodal area profile many times and prints
how often each slice gets picked.
"""

from pathlib import Path

import numpy as np

from ctslim import (
    AreaProfile,
    KdsConfig,
    SelectionWindow,
    kds_sample,
    percentile,
    random_sample,
    systematic_sample,
    window_density,
)

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

n = 48
pos = np.arange(n, dtype=float)
areas = np.round(900 * np.exp(-0.5 * ((pos - 12) / 3.5) ** 2)
                 + 550 * np.exp(-0.5 * ((pos - 35) / 5.0) ** 2)).astype(int)
profile = AreaProfile("demo", areas)
window = SelectionWindow(s=0, e=n - 1, area_sum=int(areas.sum()),
                         area_fraction=1.0, alpha_satisfied=True)
cfg = KdsConfig(num_samples=6)

model = window_density(profile, window, cfg)
print(f"Scott bandwidth over the window: {model.bandwidth:.3f} slice units")
cuts = [percentile(model, j / cfg.num_samples) for j in range(1, cfg.num_samples)]
print("equal-mass cut points:", [f"{c:.1f}" for c in cuts])
print("(short sub-intervals sit on the density peaks)")

rounds = 3000
freq = {name: np.zeros(n) for name in ("kds", "random", "systematic")}
for seed in range(rounds):
    for i in kds_sample(profile, window, cfg, seed).indices:
        freq["kds"][i] += 1
    for i in random_sample(window, cfg.num_samples, seed, scan_id="demo").indices:
        freq["random"][i] += 1
    for i in systematic_sample(window, cfg.num_samples, seed, scan_id="demo").indices:
        freq["systematic"][i] += 1

print(f"\nselection frequency over {rounds} seeded draws of {cfg.num_samples}:")
print("slice  area    kds  random  systematic")
for i in range(n):
    print(f"{i:5d} {areas[i]:5d} {freq['kds'][i]:6.0f} {freq['random'][i]:7.0f}"
          f" {freq['systematic'][i]:11.0f}")

print("\nrandom spreads evenly; kds concentrates on the two area peaks while"
      "\nstill visiting the valley (one sample per sub-interval, always).")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (top, bottom) = plt.subplots(2, 1, figsize=(9, 6), sharex=True)
    top.bar(pos, areas, color="lightgray", label="slice area")
    top.plot(model.grid, model.density * areas.sum(), "r-", label="KDE (scaled)")
    for c in cuts:
        top.axvline(c, color="k", ls=":", lw=0.8)
    top.legend()
    top.set_ylabel("area / scaled density")
    for name, style in (("kds", "r-"), ("random", "b--"), ("systematic", "g-.")):
        bottom.plot(pos, freq[name] / rounds, style, label=name)
    bottom.set_xlabel("slice position")
    bottom.set_ylabel("selection probability")
    bottom.legend()
    fig.tight_layout()
    fig.savefig(OUT / "kds_sampling.png", dpi=120)
    print(f"wrote {OUT / 'kds_sampling.png'}")
except ImportError:
    pass
