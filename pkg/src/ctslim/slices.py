"""Slice redundancy removal: cavity area per slice and window selection.

A slice's "lung area" is the number of pixels enclosed by the body mask:
fill the mask's holes, subtract the mask.  Out-of-distribution slices at
the start and end of a scan have little or no enclosed cavity, so the
contiguous window maximizing total area under a length budget keeps the
diagnostically relevant middle of the scan.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import AllSlicesEmpty, EmptyMask, EmptyProfile
from .scan_io import ScanVolume
from .spatial import (
    CropBox,
    SegmentationMask,
    SpatialConfig,
    crop_box,
    low_pass_filter,
    threshold_mask,
)

logger = logging.getLogger(__name__)

# 4-connectivity: a hole is a background region with no 4-connected path
# to the image border.
_FILL_STRUCTURE = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass(frozen=True, eq=False)
class AreaProfile:
    """Per-slice cavity areas of one scan, in slice order."""

    scan_id: str
    areas: np.ndarray

    def __post_init__(self):
        areas = np.asarray(self.areas, dtype=np.int64)
        if areas.ndim != 1:
            raise ValueError("areas must be a 1-D sequence")
        if areas.size and areas.min() < 0:
            raise ValueError("areas must be non-negative")
        areas.flags.writeable = False
        object.__setattr__(self, "areas", areas)

    def __len__(self) -> int:
        return int(self.areas.size)

    @property
    def total_area(self) -> int:
        return int(self.areas.sum())


@dataclass(frozen=True)
class SelectionWindow:
    """Chosen contiguous slice range [s, e] (inclusive, 0-based positions)."""

    s: int
    e: int
    area_sum: int
    area_fraction: float
    alpha_satisfied: bool

    def __post_init__(self):
        if not 0 <= self.s <= self.e:
            raise ValueError(f"degenerate window [{self.s}, {self.e}]")

    @property
    def num_slices(self) -> int:
        return self.e - self.s + 1


@dataclass(frozen=True)
class SliceConfig:
    """Window length budget and coverage requirement.

    The length bound is ``ceil(window_fraction * num_slices)`` in index
    difference (``e - s``), i.e. one more slice than that in count.
    ``alpha`` is the fraction of the scan's total cavity area the window
    should cover; when no window of allowed length reaches it, the best
    window is still returned with ``alpha_satisfied`` false.
    """

    window_fraction: float = 0.5
    alpha: float = 0.7

    def __post_init__(self):
        if not 0.0 < self.window_fraction <= 1.0:
            raise ValueError("window_fraction must lie in (0, 1]")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")


def fill_holes(mask: SegmentationMask) -> SegmentationMask:
    """Set every background pixel with no 4-connected path to the border.

    Foreground pixels are unchanged; the result pointwise contains the
    input and the operation is idempotent.
    """
    filled = ndimage.binary_fill_holes(mask.bits, structure=_FILL_STRUCTURE)
    return SegmentationMask(filled)


def lung_area(mask: SegmentationMask) -> int:
    """Enclosed cavity size: filled-mask pixels that are not mask pixels."""
    filled = fill_holes(mask)
    return int(np.count_nonzero(filled.bits & ~mask.bits))


def area_profile_and_box(volume: ScanVolume,
                         spatial_cfg: SpatialConfig) -> tuple[AreaProfile, CropBox]:
    """Cavity area of every slice after the spatial step, plus the scan box.

    Each slice runs filter -> threshold -> crop to the scan-wide box ->
    fill -> area.  Slices whose mask is blank contribute area 0.  Raises
    AllSlicesEmpty when the whole scan thresholds to blank.  Masks are
    computed once and reused for the box and the areas.
    """
    masks = []
    box = None
    for i in range(volume.num_slices):
        mask = threshold_mask(
            low_pass_filter(volume.slice_at(i), spatial_cfg.kernel_half_width),
            spatial_cfg.threshold,
        )
        masks.append(mask)
        try:
            slice_box = crop_box(mask)
        except EmptyMask:
            continue
        box = slice_box if box is None else box.union(slice_box)
    if box is None:
        raise AllSlicesEmpty(f"scan {volume.scan_id}: every slice thresholded to empty")

    areas = np.zeros(volume.num_slices, dtype=np.int64)
    for i, mask in enumerate(masks):
        cropped = SegmentationMask(
            mask.bits[box.x_min:box.x_max + 1, box.y_min:box.y_max + 1]
        )
        if not cropped.bits.any():
            continue  # blank slice, area stays 0
        areas[i] = lung_area(cropped)
    return AreaProfile(scan_id=volume.scan_id, areas=areas), box


def area_profile(volume: ScanVolume, spatial_cfg: SpatialConfig) -> AreaProfile:
    """Per-slice cavity areas in slice order; see area_profile_and_box."""
    return area_profile_and_box(volume, spatial_cfg)[0]


def window_length_bound(num_slices: int, cfg: SliceConfig) -> int:
    """Maximum slice count of a window under the config's length budget."""
    n_c = math.ceil(cfg.window_fraction * num_slices)
    return min(num_slices, n_c + 1)


def select_window(profile: AreaProfile, cfg: SliceConfig) -> SelectionWindow:
    """Contiguous window of allowed length with maximal total area.

    Areas are non-negative, so some maximal-length window is optimal; a
    sliding sum finds it in O(n).  Ties break toward the smallest start.
    ``area_fraction`` is the window's share of the scan's total area
    (0 for an all-zero profile), and ``alpha_satisfied`` reports whether
    it reaches ``cfg.alpha``.
    """
    n = len(profile)
    if n == 0:
        raise EmptyProfile(f"scan {profile.scan_id}: empty area profile")
    length = window_length_bound(n, cfg)
    areas = profile.areas
    window_sums = np.convolve(areas, np.ones(length, dtype=np.int64), mode="valid")
    start = int(window_sums.argmax())  # argmax takes the first maximum
    area_sum = int(window_sums[start])
    total = profile.total_area
    fraction = (area_sum / total) if total > 0 else 0.0
    satisfied = fraction >= cfg.alpha
    if not satisfied:
        logger.info(
            "scan %s: best window covers %.3f of total area (< alpha=%.3f)",
            profile.scan_id, fraction, cfg.alpha,
        )
    return SelectionWindow(
        s=start,
        e=start + length - 1,
        area_sum=area_sum,
        area_fraction=fraction,
        alpha_satisfied=satisfied,
    )
