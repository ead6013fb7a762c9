"""Loading CT scans from disk and generating synthetic scans for tests.

A scan is stored as a directory of lossless grayscale raster images
(``.png``, ``.pgm``, ``.tif``/``.tiff``), one file per slice, with the
slice order given by a trailing decimal integer in the filename stem
(``slice1.png``, ``slice2.png``, ... sorted numerically, not
lexicographically).  DICOM is deliberately out of scope; convert series
to one of the supported formats first.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    DecodeError,
    EmptyScan,
    InvalidSpec,
    MixedDimensions,
    UnparsableIndex,
)

IMAGE_SUFFIXES = {".png", ".pgm", ".tif", ".tiff"}

_TRAILING_INT = re.compile(r"(\d+)$")


@dataclass(frozen=True, eq=False)
class SliceImage:
    """One grayscale slice: a (height, width) pixel grid plus its intensity ceiling.

    ``pixels`` is integer-typed for slices read from disk and may be float
    after filtering; values always lie in ``[0, max_intensity]``.
    """

    pixels: np.ndarray
    max_intensity: int = 255

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ValueError(f"slice pixels must be 2-D, got shape {px.shape}")
        if px.size and (px.min() < 0 or px.max() > self.max_intensity):
            raise ValueError(
                f"pixel values outside [0, {self.max_intensity}]:"
                f" min={px.min()}, max={px.max()}"
            )
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True, eq=False)
class ScanVolume:
    """An ordered stack of same-shape slices with the scan's identity.

    ``pixels`` has shape (num_slices, height, width) and is made read-only
    so a volume can be shared across threads.  ``slice_indices`` holds the
    source ordering keys (the trailing integers of the filenames), strictly
    increasing.
    """

    scan_id: str
    pixels: np.ndarray
    slice_indices: np.ndarray
    max_intensity: int = 255

    def __post_init__(self):
        px = np.asarray(self.pixels)
        idx = np.asarray(self.slice_indices, dtype=np.int64)
        if px.ndim != 3:
            raise ValueError(f"volume pixels must be 3-D, got shape {px.shape}")
        if idx.shape != (px.shape[0],):
            raise ValueError("slice_indices length must match slice count")
        if idx.size > 1 and np.any(np.diff(idx) <= 0):
            raise ValueError("slice_indices must be strictly increasing")
        px = px.copy() if px.flags.writeable else px
        px.flags.writeable = False
        idx.flags.writeable = False
        object.__setattr__(self, "pixels", px)
        object.__setattr__(self, "slice_indices", idx)

    @property
    def num_slices(self) -> int:
        return self.pixels.shape[0]

    @property
    def height(self) -> int:
        return self.pixels.shape[1]

    @property
    def width(self) -> int:
        return self.pixels.shape[2]

    def __len__(self) -> int:
        return self.num_slices

    def slice_at(self, position: int) -> SliceImage:
        """Slice at 0-based position in scan order (not the filename index)."""
        return SliceImage(self.pixels[position], self.max_intensity)

    @property
    def slices(self) -> tuple[SliceImage, ...]:
        return tuple(self.slice_at(i) for i in range(self.num_slices))


def _decode_image(path: Path) -> tuple[np.ndarray, int]:
    """Read one grayscale image, returning (pixels, max_intensity)."""
    try:
        with Image.open(path) as img:
            img.load()
            mode = img.mode
            arr = np.asarray(img)
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise DecodeError(f"cannot decode {path}: {exc}") from exc
    if mode == "L":
        return arr.astype(np.uint8), 255
    if mode in ("I;16", "I;16B", "I;16L"):
        return arr.astype(np.uint16), 65535
    if mode == "I":
        # Pillow reports some 16-bit grayscale files as 32-bit "I".
        if arr.min() < 0 or arr.max() > 65535:
            raise DecodeError(f"{path}: integer image exceeds 16-bit range")
        return arr.astype(np.uint16), 65535
    raise DecodeError(f"{path}: unsupported image mode {mode!r} (grayscale only)")


def load_scan(directory_path: str | Path) -> ScanVolume:
    """Load every slice image in ``directory_path`` as one ScanVolume.

    Slices are ordered by the ascending trailing integer of each filename
    stem; that integer becomes the slice's entry in ``slice_indices``.  The
    directory name becomes the scan id.

    Raises
    ------
    EmptyScan
        if no supported image file is present.
    UnparsableIndex
        if a filename stem has no trailing integer, or two files share one.
    MixedDimensions
        if slices disagree on width/height or bit depth.
    DecodeError
        if an image cannot be decoded as grayscale.
    """
    directory_path = Path(directory_path)
    files = sorted(
        p for p in directory_path.iterdir()
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    )
    if not files:
        raise EmptyScan(f"no image files in {directory_path}")

    keyed: list[tuple[int, Path]] = []
    for path in files:
        m = _TRAILING_INT.search(path.stem)
        if m is None:
            raise UnparsableIndex(f"{path.name}: filename stem has no trailing integer")
        keyed.append((int(m.group(1)), path))
    keyed.sort(key=lambda kv: kv[0])
    for (ia, pa), (ib, pb) in zip(keyed, keyed[1:]):
        if ia == ib:
            raise UnparsableIndex(
                f"duplicate slice index {ia}: {pa.name} and {pb.name}"
            )

    planes = []
    max_intensity = None
    for _, path in keyed:
        arr, maxval = _decode_image(path)
        if planes and (arr.shape != planes[0].shape or maxval != max_intensity):
            raise MixedDimensions(
                f"{path.name}: got {arr.shape} @ {maxval}, expected"
                f" {planes[0].shape} @ {max_intensity}"
            )
        planes.append(arr)
        max_intensity = maxval

    return ScanVolume(
        scan_id=directory_path.name,
        pixels=np.stack(planes),
        slice_indices=np.array([k for k, _ in keyed], dtype=np.int64),
        max_intensity=max_intensity,
    )


def save_slice(image: SliceImage, path: str | Path) -> None:
    """Write a slice losslessly; 8-bit as mode L, 16-bit as I;16."""
    path = Path(path)
    px = np.asarray(image.pixels)
    if not np.issubdtype(px.dtype, np.integer):
        px = np.floor(px + 0.5).astype(np.int64)  # half-up, matches resize rounding
    if image.max_intensity <= 255:
        Image.fromarray(px.astype(np.uint8), mode="L").save(path)
    else:
        Image.fromarray(px.astype(np.uint16)).save(path)  # Pillow infers I;16


# --- synthetic scans ------------------------------------------------------
#
# The generator builds slices whose geometry is known exactly: a black
# frame, a bright elliptical body, and dark rectangular-block "lungs"
# whose pixel count per slice follows a Gaussian curve over the slice
# index.  The returned ground truth (body bounding box, per-slice hole
# counts) is exact by construction, which gives the processing modules
# an independent oracle at zero noise.

BODY_LEVEL = 0.8    # body intensity as a fraction of max_intensity
HOLE_LEVEL = 0.02   # hole intensity fraction; below any sane threshold


@dataclass(frozen=True)
class SyntheticScanSpec:
    """Parameters for one synthetic scan.

    ``lung_area_curve`` is the Gaussian width (in slice-index units) of the
    per-slice hole-area profile, which peaks at ``lung_area_peak`` in the
    middle slice.  ``noise_amplitude`` adds uniform integer noise in
    ``[-a, a]``; at 0 the ground truth is exact.
    """

    num_slices: int
    image_size: int
    body_margin: int
    lung_area_peak: int
    lung_area_curve: float
    noise_amplitude: int = 0
    seed: int = 0
    max_intensity: int = 255
    scan_id: str = "synthetic"


@dataclass(frozen=True)
class GroundTruth:
    """Exact geometry of a generated scan."""

    crop_boxes: tuple[tuple[int, int, int, int], ...]  # (x_min, x_max, y_min, y_max) per slice
    lung_areas: tuple[int, ...]                        # hole pixel count per slice


def _gaussian_area_targets(spec: SyntheticScanSpec) -> list[int]:
    n = spec.num_slices
    center = (n - 1) / 2.0
    width = max(spec.lung_area_curve, 1e-9)
    idx = np.arange(n, dtype=float)
    targets = spec.lung_area_peak * np.exp(-0.5 * ((idx - center) / width) ** 2)
    return [int(round(t)) for t in targets]


def _body_mask(size: int, margin: int) -> np.ndarray:
    """Ellipse whose pixel bounding box is exactly [margin, size-1-margin]^2.

    Membership uses continuous radii of extent/2 against pixel centers; the
    apex rows/columns then always contain at least one pixel (the chord at
    the extreme row has length >= 1), so the bounding box is exact for any
    extent >= 1.
    """
    extent = size - 2 * margin
    cx = margin + (extent - 1) / 2.0
    r = extent / 2.0
    ii, jj = np.mgrid[0:size, 0:size]
    return ((ii - cx) / r) ** 2 + ((jj - cx) / r) ** 2 <= 1.0


def _block_pixels(area: int, width: int) -> list[tuple[int, int]]:
    """Row-major offsets of ``area`` pixels packed into rows of ``width``."""
    out = []
    for t in range(area):
        out.append((t // width, t % width))
    return out


def _carve_holes(body: np.ndarray, spec: SyntheticScanSpec, area: int) -> np.ndarray:
    """Return a hole mask of exactly ``area`` pixels, strictly inside the body.

    Two blocks (left and right "lung") are packed inside the ellipse's
    inscribed rectangle, shrunk by one pixel so a full ring of body pixels
    always separates holes from the background.
    """
    size = spec.image_size
    hole = np.zeros_like(body)
    if area == 0:
        return hole
    extent = size - 2 * spec.body_margin
    c = spec.body_margin + (extent - 1) / 2.0
    r = extent / 2.0
    half = r / np.sqrt(2.0)
    lo = int(np.ceil(c - half)) + 1
    hi = int(np.floor(c + half)) - 1
    if hi < lo:
        raise InvalidSpec("body too small to hold any lung hole")
    mid = (lo + hi) // 2
    zones = [(lo, mid - 1), (mid + 1, hi)]  # one column gap between lungs
    parts = [area - area // 2, area // 2]
    for (z0, z1), part in zip(zones, parts):
        if part == 0:
            continue
        zone_w = z1 - z0 + 1
        zone_h = hi - lo + 1
        if zone_w < 1 or part > zone_w * zone_h:
            raise InvalidSpec(
                f"lung area {area} does not fit inside the body region"
            )
        width = min(zone_w, int(np.ceil(np.sqrt(part))))
        if int(np.ceil(part / width)) > zone_h:
            width = int(np.ceil(part / zone_h))
        for di, dj in _block_pixels(part, width):
            hole[lo + di, z0 + dj] = True
    if not body[hole].all():
        raise InvalidSpec("lung hole escaped the body ellipse")
    return hole


def generate_synthetic_scan(spec: SyntheticScanSpec) -> tuple[ScanVolume, GroundTruth]:
    """Build a parametric scan plus its exact geometry.

    Deterministic for a fixed seed: two calls with the same spec return
    bit-identical volumes.

    Raises
    ------
    InvalidSpec
        if the margins leave no body, or the peak hole area cannot be
        packed strictly inside the body ellipse.
    """
    if spec.num_slices < 1:
        raise InvalidSpec("num_slices must be >= 1")
    if spec.body_margin < 0 or 2 * spec.body_margin >= spec.image_size:
        raise InvalidSpec("body_margin leaves no body region")
    if spec.lung_area_peak < 0:
        raise InvalidSpec("lung_area_peak must be >= 0")

    size = spec.image_size
    body = _body_mask(size, spec.body_margin)
    body_level = int(round(BODY_LEVEL * spec.max_intensity))
    hole_level = int(round(HOLE_LEVEL * spec.max_intensity))
    rng = np.random.default_rng(spec.seed)

    targets = _gaussian_area_targets(spec)
    dtype = np.uint8 if spec.max_intensity <= 255 else np.uint16
    planes = np.zeros((spec.num_slices, size, size), dtype=dtype)
    boxes = []
    areas = []
    xmn, xmx = spec.body_margin, size - 1 - spec.body_margin
    for i, target in enumerate(targets):
        hole = _carve_holes(body, spec, target)
        plane = np.zeros((size, size), dtype=np.int64)
        plane[body] = body_level
        plane[hole] = hole_level
        if spec.noise_amplitude > 0:
            noise = rng.integers(
                -spec.noise_amplitude, spec.noise_amplitude + 1, size=plane.shape
            )
            plane = np.clip(plane + noise, 0, spec.max_intensity)
        planes[i] = plane.astype(dtype)
        boxes.append((xmn, xmx, xmn, xmx))
        areas.append(int(hole.sum()))

    volume = ScanVolume(
        scan_id=spec.scan_id,
        pixels=planes,
        slice_indices=np.arange(1, spec.num_slices + 1),
        max_intensity=spec.max_intensity,
    )
    return volume, GroundTruth(crop_boxes=tuple(boxes), lung_areas=tuple(areas))
