"""Spatial redundancy removal: filter, threshold, minimal crop, resize.

The spatial step turns each slice into a body mask and crops the scan to
the union of the per-slice mask bounding boxes, so every slice of a scan
shares one geometry afterwards.  Axis convention throughout: ``x`` indexes
rows (height), ``y`` indexes columns (width), matching the row-major pixel
layout.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import AllSlicesEmpty, BoxOutOfBounds, EmptyMask
from .scan_io import ScanVolume, SliceImage

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SegmentationMask:
    """Binary body mask with the source slice's shape."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {bits.shape}")
        if bits.dtype != bool:
            uniq = np.unique(bits)
            if not np.isin(uniq, (0, 1)).all():
                raise ValueError("mask values must be exactly 0 or 1")
            bits = bits.astype(bool)
        object.__setattr__(self, "bits", bits)

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]


@dataclass(frozen=True)
class CropBox:
    """Inclusive pixel bounds: rows [x_min, x_max], columns [y_min, y_max]."""

    x_min: int
    x_max: int
    y_min: int
    y_max: int

    def __post_init__(self):
        if not (0 <= self.x_min <= self.x_max and 0 <= self.y_min <= self.y_max):
            raise ValueError(f"degenerate crop box {self}")

    @property
    def height(self) -> int:
        return self.x_max - self.x_min + 1

    @property
    def width(self) -> int:
        return self.y_max - self.y_min + 1

    @property
    def area(self) -> int:
        return self.height * self.width

    def union(self, other: "CropBox") -> "CropBox":
        return CropBox(
            min(self.x_min, other.x_min),
            max(self.x_max, other.x_max),
            min(self.y_min, other.y_min),
            max(self.y_max, other.y_max),
        )

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x_min, self.x_max, self.y_min, self.y_max)


@dataclass(frozen=True)
class SpatialConfig:
    """Knobs of the spatial step.

    ``kernel_half_width`` is the filter's half width (window is
    ``(2k+1) x (2k+1)``); ``threshold`` is a fraction of the slice's
    ``max_intensity``.  Defaults suit near-zero-background chest CT; other
    views or body parts may need adjustment.
    """

    kernel_half_width: int = 2
    threshold: float = 0.1
    output_height: int = 384
    output_width: int = 384

    def __post_init__(self):
        if self.kernel_half_width < 0:
            raise ValueError("kernel_half_width must be >= 0")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie in (0, 1)")
        if self.output_height < 1 or self.output_width < 1:
            raise ValueError("output dimensions must be >= 1")


def low_pass_filter(image: SliceImage, k: int) -> SliceImage:
    """Mean filter over a (2k+1) x (2k+1) window with uniform weights.

    Near the borders the window is clipped to the image and the divisor
    shrinks to the in-bounds neighbor count, so edges are not darkened.
    ``k = 0`` is the identity.  The result carries float pixels (exact
    window means); the intensity range is unchanged.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    px = np.asarray(image.pixels)
    if k == 0:
        return SliceImage(px.copy(), image.max_intensity)
    # Summed-area tables give exact integer window sums and counts.
    acc = px.astype(np.float64) if np.issubdtype(px.dtype, np.floating) else px.astype(np.int64)
    return SliceImage(_window_sums(acc, k) / _window_counts(px.shape, k),
                      image.max_intensity)


def _window_sums(arr: np.ndarray, k: int) -> np.ndarray:
    """Sum of arr over the clipped (2k+1)^2 window centered at each pixel.

    Zero-padding by k makes every window interior, so the sums reduce to
    four slices of one summed-area table.
    """
    h, w = arr.shape
    padded = np.zeros((h + 2 * k, w + 2 * k), dtype=arr.dtype)
    padded[k:k + h, k:k + w] = arr
    sat = np.zeros((h + 2 * k + 1, w + 2 * k + 1), dtype=arr.dtype)
    np.cumsum(np.cumsum(padded, axis=0), axis=1, out=sat[1:, 1:])
    size = 2 * k + 1
    return sat[size:, size:] - sat[:h, size:] - sat[size:, :w] + sat[:h, :w]


@lru_cache(maxsize=8)
def _window_counts(shape: tuple[int, int], k: int) -> np.ndarray:
    """In-bounds neighbor count per pixel; shared across slices of a scan."""
    counts = _window_sums(np.ones(shape, dtype=np.int64), k)
    counts.flags.writeable = False
    return counts


def threshold_mask(filtered: SliceImage, t: float) -> SegmentationMask:
    """Mark every pixel with intensity >= t * max_intensity as foreground."""
    if not 0.0 < t < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    cutoff = t * filtered.max_intensity
    return SegmentationMask(np.asarray(filtered.pixels) >= cutoff)


def crop_box(mask: SegmentationMask) -> CropBox:
    """Minimal bounding box of the mask's foreground.

    Raises EmptyMask for a blank mask, which callers treat as a degenerate
    slice rather than a fatal error.
    """
    rows = np.flatnonzero(mask.bits.any(axis=1))
    cols = np.flatnonzero(mask.bits.any(axis=0))
    if rows.size == 0:
        raise EmptyMask("mask has no foreground pixel")
    return CropBox(int(rows[0]), int(rows[-1]), int(cols[0]), int(cols[-1]))


def scan_crop_box(volume: ScanVolume, cfg: SpatialConfig) -> CropBox:
    """Union of per-slice crop boxes: one shared crop for the whole scan.

    Blank slices are skipped; if every slice is blank the scan carries no
    body signal and AllSlicesEmpty is raised.
    """
    box = None
    skipped = 0
    for i in range(volume.num_slices):
        mask = threshold_mask(
            low_pass_filter(volume.slice_at(i), cfg.kernel_half_width),
            cfg.threshold,
        )
        try:
            slice_box = crop_box(mask)
        except EmptyMask:
            skipped += 1
            continue
        box = slice_box if box is None else box.union(slice_box)
    if box is None:
        raise AllSlicesEmpty(f"scan {volume.scan_id}: every slice thresholded to empty")
    if skipped:
        logger.debug("scan %s: %d blank slice(s) skipped", volume.scan_id, skipped)
    return box


def apply_crop_and_resize(image: SliceImage, box: CropBox, out_height: int,
                          out_width: int) -> SliceImage:
    """Crop to ``box`` then bilinearly resample to (out_height, out_width).

    Sampling uses half-pixel centers, so resizing a crop to its own size is
    the identity.  Integer inputs are rounded half-up back to integers.
    """
    px = np.asarray(image.pixels)
    h, w = px.shape
    if box.x_max >= h or box.y_max >= w:
        raise BoxOutOfBounds(f"{box} exceeds slice shape {(h, w)}")
    region = px[box.x_min:box.x_max + 1, box.y_min:box.y_max + 1]
    out = _bilinear_resize(region.astype(np.float64), out_height, out_width)
    if np.issubdtype(px.dtype, np.integer):
        out = np.floor(out + 0.5).astype(px.dtype)  # round half up
    return SliceImage(out, image.max_intensity)


def _axis_weights(src: int, dst: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    pos = (np.arange(dst) + 0.5) * (src / dst) - 0.5
    pos = np.clip(pos, 0.0, src - 1.0)
    lo = np.floor(pos).astype(np.intp)
    hi = np.minimum(lo + 1, src - 1)
    return lo, hi, pos - lo


def _bilinear_resize(region: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    rlo, rhi, rf = _axis_weights(region.shape[0], out_h)
    clo, chi, cf = _axis_weights(region.shape[1], out_w)
    top = region[rlo][:, clo] * (1 - cf) + region[rlo][:, chi] * cf
    bottom = region[rhi][:, clo] * (1 - cf) + region[rhi][:, chi] * cf
    return top * (1 - rf[:, None]) + bottom * rf[:, None]
