"""Corpus-level orchestration: manifests, redundancy report, corpus fixtures.

``run_pipeline`` processes every scan directory under a corpus root
(load -> crop box -> area profile -> window -> sample), emits one JSON
manifest per scan plus a JSON-lines index, and aggregates a redundancy
report over the corpus and over optional label groups.  Per-scan failures
are logged and counted; they never abort the corpus.
"""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import PipelineConfig, parse_flat_file
from .errors import CtslimError, NoScans, ParseError
from .kds import SampleSet, kds_sample, random_sample, systematic_sample
from .scan_io import (
    ScanVolume,
    SyntheticScanSpec,
    generate_synthetic_scan,
    load_scan,
    save_slice,
)
from .slices import SelectionWindow, area_profile_and_box, select_window
from .spatial import CropBox, apply_crop_and_resize

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScanManifest:
    """Everything downstream training needs to pick this scan's slices."""

    scan_id: str
    original_dims: dict        # width, height, num_slices
    crop_box: dict             # x_min, x_max, y_min, y_max
    window: dict               # s, e, area_sum, area_fraction, alpha_satisfied
    sampled_indices: list
    strategy: str
    seed: int
    areas: list

    def to_dict(self) -> dict:
        return {
            "scan_id": self.scan_id,
            "original_dims": self.original_dims,
            "crop_box": self.crop_box,
            "window": self.window,
            "sampled_indices": self.sampled_indices,
            "strategy": self.strategy,
            "seed": self.seed,
            "areas": self.areas,
        }


@dataclass(frozen=True)
class GroupReduction:
    """Mean before/after sizes for one group, Table-style.

    Averaging order: group means of the raw quantities first, then
    ``delta = 1 - after/before`` from those means.  The product columns
    multiply the two means, so ``1 - total_delta`` factors exactly into
    ``(1 - spatial_delta) * (1 - slice_delta)``.
    """

    num_scans: int
    spatial_area_before: float
    spatial_area_after: float
    spatial_delta: float
    slice_len_before: float
    slice_len_after: float
    slice_delta: float
    product_before: float
    product_after: float
    total_delta: float

    @classmethod
    def from_manifests(cls, manifests: list[ScanManifest]) -> "GroupReduction":
        sa_before = float(np.mean([
            m.original_dims["width"] * m.original_dims["height"] for m in manifests
        ]))
        sa_after = float(np.mean([
            (m.crop_box["x_max"] - m.crop_box["x_min"] + 1)
            * (m.crop_box["y_max"] - m.crop_box["y_min"] + 1)
            for m in manifests
        ]))
        sl_before = float(np.mean([m.original_dims["num_slices"] for m in manifests]))
        sl_after = float(np.mean([m.window["e"] - m.window["s"] + 1 for m in manifests]))
        product_before = sa_before * sl_before
        product_after = sa_after * sl_after
        return cls(
            num_scans=len(manifests),
            spatial_area_before=sa_before,
            spatial_area_after=sa_after,
            spatial_delta=1.0 - sa_after / sa_before,
            slice_len_before=sl_before,
            slice_len_after=sl_after,
            slice_delta=1.0 - sl_after / sl_before,
            product_before=product_before,
            product_after=product_after,
            total_delta=1.0 - product_after / product_before,
        )

    def to_dict(self) -> dict:
        return {
            "num_scans": self.num_scans,
            "spatial_area_before": self.spatial_area_before,
            "spatial_area_after": self.spatial_area_after,
            "spatial_delta": self.spatial_delta,
            "slice_len_before": self.slice_len_before,
            "slice_len_after": self.slice_len_after,
            "slice_delta": self.slice_delta,
            "product_before": self.product_before,
            "product_after": self.product_after,
            "total_delta": self.total_delta,
        }


@dataclass(frozen=True)
class RedundancyReport:
    """Per-group reductions; the "corpus" group always exists."""

    groups: dict[str, GroupReduction]

    def to_dict(self) -> dict:
        return {"groups": {name: g.to_dict() for name, g in self.groups.items()}}

    def table(self) -> str:
        """Fixed-width text table with 4-decimal deltas."""
        header = (
            f"{'group':<14} {'sp_before':>12} {'sp_after':>12} {'delta':>7} "
            f"{'sl_before':>10} {'sl_after':>9} {'delta':>7} "
            f"{'prod_before':>14} {'prod_after':>14} {'delta':>7}"
        )
        lines = [header]
        for name, g in self.groups.items():
            lines.append(
                f"{name:<14} {g.spatial_area_before:>12.1f} {g.spatial_area_after:>12.1f}"
                f" {g.spatial_delta:>7.4f} {g.slice_len_before:>10.1f}"
                f" {g.slice_len_after:>9.1f} {g.slice_delta:>7.4f}"
                f" {g.product_before:>14.1f} {g.product_after:>14.1f}"
                f" {g.total_delta:>7.4f}"
            )
        return "\n".join(lines)


@dataclass(frozen=True)
class PipelineResult:
    manifests: list[ScanManifest]
    report: RedundancyReport
    failures: dict[str, str]


def _draw_samples(profile, window: SelectionWindow, config: PipelineConfig) -> SampleSet:
    if config.strategy == "kds":
        return kds_sample(profile, window, config.kds, config.seed)
    if config.strategy == "random":
        return random_sample(window, config.kds.num_samples, config.seed,
                             scan_id=profile.scan_id)
    return systematic_sample(window, config.kds.num_samples, config.seed,
                             scan_id=profile.scan_id)


def process_scan(volume: ScanVolume, config: PipelineConfig) -> ScanManifest:
    """Reduce one loaded scan to its manifest (pure; safe to parallelize)."""
    profile, box = area_profile_and_box(volume, config.spatial)
    window = select_window(profile, config.slices)
    samples = _draw_samples(profile, window, config)
    return ScanManifest(
        scan_id=volume.scan_id,
        original_dims={
            "width": volume.width,
            "height": volume.height,
            "num_slices": volume.num_slices,
        },
        crop_box={
            "x_min": box.x_min, "x_max": box.x_max,
            "y_min": box.y_min, "y_max": box.y_max,
        },
        window={
            "s": window.s,
            "e": window.e,
            "area_sum": window.area_sum,
            "area_fraction": window.area_fraction,
            "alpha_satisfied": window.alpha_satisfied,
        },
        sampled_indices=list(samples.indices),
        strategy=config.strategy,
        seed=config.seed,
        areas=[int(a) for a in profile.areas],
    )


def _export_slices(volume: ScanVolume, manifest: ScanManifest,
                   config: PipelineConfig, out_dir: Path) -> None:
    box = CropBox(**manifest.crop_box)
    scan_dir = out_dir / "slices" / manifest.scan_id
    scan_dir.mkdir(parents=True, exist_ok=True)
    for pos in manifest.sampled_indices:
        resized = apply_crop_and_resize(
            volume.slice_at(pos), box,
            config.spatial.output_height, config.spatial.output_width,
        )
        save_slice(resized, scan_dir / f"slice{pos:04d}.png")


def _one_scan(scan_dir: Path, config: PipelineConfig,
              out_dir: Path | None) -> ScanManifest:
    volume = load_scan(scan_dir)
    manifest = process_scan(volume, config)
    if config.export_images and out_dir is not None:
        _export_slices(volume, manifest, config, out_dir)
    return manifest


def read_labels_csv(path: str | Path) -> dict[str, str]:
    """Read ``scan_id,label`` rows; a matching header row is skipped."""
    labels: dict[str, str] = {}
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise ParseError(f"{path}: line {lineno}: expected 2 fields, got {len(row)}")
            scan_id, label = (field.strip() for field in row)
            if lineno == 1 and (scan_id, label) == ("scan_id", "label"):
                continue
            labels[scan_id] = label
    return labels


def build_report(manifests: list[ScanManifest],
                 labels: dict[str, str] | None = None) -> RedundancyReport:
    groups = {"corpus": GroupReduction.from_manifests(manifests)}
    if labels:
        by_label: dict[str, list[ScanManifest]] = {}
        for m in manifests:
            label = labels.get(m.scan_id)
            if label is not None:
                by_label.setdefault(label, []).append(m)
        for label in sorted(by_label):
            groups[label] = GroupReduction.from_manifests(by_label[label])
    return RedundancyReport(groups=groups)


def run_pipeline(corpus_dir: str | Path, config: PipelineConfig,
                 out_dir: str | Path | None = None,
                 labels: dict[str, str] | None = None) -> PipelineResult:
    """Reduce every scan under ``corpus_dir``.

    Scan directories are the immediate subdirectories of the corpus root,
    processed by a pool of ``config.parallelism`` workers.  Results are
    keyed and written in sorted scan order, so output bytes do not depend
    on the worker count.  When ``out_dir`` is given, manifests, the index,
    the report and a run summary are written there.
    """
    corpus_dir = Path(corpus_dir)
    scan_dirs = sorted(p for p in corpus_dir.iterdir() if p.is_dir()) \
        if corpus_dir.is_dir() else []
    if not scan_dirs:
        raise NoScans(f"no scan directories under {corpus_dir}")
    out_path = Path(out_dir) if out_dir is not None else None

    manifests: dict[str, ScanManifest] = {}
    failures: dict[str, str] = {}

    def work(scan_dir: Path):
        # Never raises: failures become markers so one corrupt scan cannot
        # abort the corpus.
        try:
            return scan_dir.name, _one_scan(scan_dir, config, out_path), None
        except (CtslimError, OSError) as exc:
            logger.warning("scan %s failed: %s", scan_dir.name, exc)
            return scan_dir.name, None, f"{type(exc).__name__}: {exc}"

    if config.parallelism == 1:
        results = list(map(work, scan_dirs))
    else:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            results = list(pool.map(work, scan_dirs))
    for name, manifest, error in results:
        if error is None:
            manifests[name] = manifest
        else:
            failures[name] = error

    ordered = [manifests[k] for k in sorted(manifests)]
    if not ordered:
        raise NoScans(f"all {len(scan_dirs)} scan(s) under {corpus_dir} failed")
    report = build_report(ordered, labels)
    result = PipelineResult(manifests=ordered, report=report,
                            failures=dict(sorted(failures.items())))
    if out_path is not None:
        write_outputs(result, out_path)
    return result


def write_outputs(result: PipelineResult, out_dir: Path) -> None:
    manifest_dir = out_dir / "manifests"
    manifest_dir.mkdir(parents=True, exist_ok=True)
    index_lines = []
    for manifest in result.manifests:
        doc = manifest.to_dict()
        (manifest_dir / f"{manifest.scan_id}.json").write_text(
            json.dumps(doc, indent=2) + "\n"
        )
        index_lines.append(json.dumps(doc, separators=(",", ":")))
    (out_dir / "manifest_index.jsonl").write_text(
        "".join(line + "\n" for line in index_lines)
    )
    (out_dir / "report.json").write_text(
        json.dumps(result.report.to_dict(), indent=2) + "\n"
    )
    (out_dir / "run_summary.json").write_text(json.dumps({
        "processed": len(result.manifests),
        "failed": len(result.failures),
        "failures": result.failures,
    }, indent=2) + "\n")


# --- synthetic corpus generation -------------------------------------------
#
# A corpus spec is the same flat key/value format as the pipeline config:
#
#     num_scans = 12
#     num_slices = 100          # int, or "lo:hi" for a per-scan range
#     image_size = 100
#     body_margin = 11          # int or "lo:hi"
#     lung_area_peak = 600      # int or "lo:hi"
#     lung_area_curve = 20.0
#     noise_amplitude = 0
#     seed = 7
#     bit_depth = 8             # 8 or 16

_RANGED_KEYS = ("num_slices", "body_margin", "lung_area_peak")


def _int_or_range(text: str) -> tuple[int, int]:
    if ":" in text:
        lo, hi = text.split(":", 1)
        lo, hi = int(lo), int(hi)
    else:
        lo = hi = int(text)
    if hi < lo:
        raise ValueError(f"empty range {text!r}")
    return lo, hi


def parse_corpus_spec(raw: dict[str, str]) -> dict:
    """Validate and type a corpus spec mapping."""
    known = {
        "num_scans": int, "image_size": int, "lung_area_curve": float,
        "noise_amplitude": int, "seed": int, "bit_depth": int,
    }
    spec: dict = {
        "num_scans": 8, "image_size": 100, "lung_area_curve": 20.0,
        "noise_amplitude": 0, "seed": 0, "bit_depth": 8,
        "num_slices": (40, 40), "body_margin": (11, 11),
        "lung_area_peak": (600, 600),
    }
    for key, text in raw.items():
        try:
            if key in _RANGED_KEYS:
                spec[key] = _int_or_range(text)
            elif key in known:
                spec[key] = known[key](text)
            else:
                raise ParseError(f"unknown corpus spec key {key!r}")
        except ValueError as exc:
            raise ParseError(f"corpus spec key {key!r}: {exc}") from exc
    if spec["num_scans"] < 1:
        raise ParseError("num_scans must be >= 1")
    if spec["bit_depth"] not in (8, 16):
        raise ParseError("bit_depth must be 8 or 16")
    return spec


def generate_corpus(spec_path: str | Path, out_dir: str | Path) -> list[str]:
    """Write a synthetic corpus in the scan-io layout plus truth sidecars.

    Each scan directory gets ``slice0001.png`` ... plus a ``truth.json``
    holding the exact body boxes and hole areas.  Deterministic for a
    fixed spec file.  Returns the scan ids written.
    """
    spec = parse_corpus_spec(parse_flat_file(spec_path))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scan_ids = []
    max_intensity = 255 if spec["bit_depth"] == 8 else 65535
    for i in range(spec["num_scans"]):
        rng = np.random.default_rng(np.random.SeedSequence([spec["seed"], i]))
        scan_id = f"scan_{i:04d}"
        scan_spec = SyntheticScanSpec(
            num_slices=int(rng.integers(spec["num_slices"][0], spec["num_slices"][1] + 1)),
            image_size=spec["image_size"],
            body_margin=int(rng.integers(spec["body_margin"][0], spec["body_margin"][1] + 1)),
            lung_area_peak=int(rng.integers(spec["lung_area_peak"][0],
                                            spec["lung_area_peak"][1] + 1)),
            lung_area_curve=spec["lung_area_curve"],
            noise_amplitude=spec["noise_amplitude"],
            seed=int(rng.integers(0, 2**31)),
            max_intensity=max_intensity,
            scan_id=scan_id,
        )
        volume, truth = generate_synthetic_scan(scan_spec)
        scan_dir = out_dir / scan_id
        scan_dir.mkdir(exist_ok=True)
        for pos in range(volume.num_slices):
            save_slice(volume.slice_at(pos),
                       scan_dir / f"slice{volume.slice_indices[pos]:04d}.png")
        (scan_dir / "truth.json").write_text(json.dumps({
            "crop_boxes": [list(b) for b in truth.crop_boxes],
            "lung_areas": list(truth.lung_areas),
        }, indent=2) + "\n")
        scan_ids.append(scan_id)
    return scan_ids
