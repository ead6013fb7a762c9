"""Redundancy reduction and density-aware slice sampling for CT volumes.

The library removes two kinds of redundancy from CT scans: the black
frame around the body on every slice (spatial), and the out-of-
distribution slices at either end of the stack (slice dimension).  A
weighted-KDE sampler then draws a small, representative set of slices
from the selected window.  See README.md for the pipeline walkthrough.
"""

from .config import PipelineConfig, parse_flat_file, parse_flat_text
from .kds import (
    DensityModel,
    KdsConfig,
    SampleSet,
    estimate_density,
    kds_sample,
    percentile,
    random_sample,
    scott_bandwidth,
    split_window,
    systematic_sample,
    window_density,
)
from .metrics import ConfusionCounts, f1_score, macro_f1, score_predictions
from .pipeline import (
    PipelineResult,
    RedundancyReport,
    ScanManifest,
    build_report,
    generate_corpus,
    process_scan,
    run_pipeline,
)
from .scan_io import (
    GroundTruth,
    ScanVolume,
    SliceImage,
    SyntheticScanSpec,
    generate_synthetic_scan,
    load_scan,
    save_slice,
)
from .slices import (
    AreaProfile,
    SelectionWindow,
    SliceConfig,
    area_profile,
    area_profile_and_box,
    fill_holes,
    lung_area,
    select_window,
)
from .spatial import (
    CropBox,
    SegmentationMask,
    SpatialConfig,
    apply_crop_and_resize,
    crop_box,
    low_pass_filter,
    scan_crop_box,
    threshold_mask,
)

__version__ = "0.1.0"

__all__ = [
    "AreaProfile", "ConfusionCounts", "CropBox", "DensityModel", "GroundTruth",
    "KdsConfig", "PipelineConfig", "PipelineResult", "RedundancyReport",
    "SampleSet", "ScanManifest", "ScanVolume", "SegmentationMask",
    "SelectionWindow", "SliceConfig", "SliceImage", "SpatialConfig",
    "SyntheticScanSpec", "apply_crop_and_resize", "area_profile",
    "area_profile_and_box", "build_report", "crop_box", "estimate_density",
    "f1_score", "fill_holes", "generate_corpus", "generate_synthetic_scan",
    "kds_sample", "load_scan", "low_pass_filter", "lung_area", "macro_f1",
    "parse_flat_file", "parse_flat_text", "percentile", "process_scan",
    "random_sample", "run_pipeline", "save_slice", "scan_crop_box",
    "score_predictions", "scott_bandwidth", "select_window", "split_window",
    "systematic_sample", "threshold_mask", "window_density",
]
