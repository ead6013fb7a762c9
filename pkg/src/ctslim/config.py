"""Pipeline configuration and the flat key/value config file format.

A config file is a plain text document of ``key = value`` lines; ``#``
starts a comment and blank lines are ignored.  Recognized keys, with
defaults:

    spatial.kernel_half_width = 2
    spatial.threshold = 0.1
    spatial.output_height = 384
    spatial.output_width = 384
    slice.window_fraction = 0.5
    slice.alpha = 0.7
    kds.num_samples = 8
    kds.grid_size = 100
    strategy = kds            # kds | random | systematic
    seed = 0
    export_images = false
    jobs = 1

The same keys can be overridden on the command line via ``--set key=value``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import ParseError
from .kds import STRATEGIES, KdsConfig
from .slices import SliceConfig
from .spatial import SpatialConfig


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_KEY_TYPES = {
    "spatial.kernel_half_width": int,
    "spatial.threshold": float,
    "spatial.output_height": int,
    "spatial.output_width": int,
    "slice.window_fraction": float,
    "slice.alpha": float,
    "kds.num_samples": int,
    "kds.grid_size": int,
    "strategy": str,
    "seed": int,
    "export_images": _parse_bool,
    "jobs": int,
}


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a corpus run needs, aggregated."""

    spatial: SpatialConfig = field(default_factory=SpatialConfig)
    slices: SliceConfig = field(default_factory=SliceConfig)
    kds: KdsConfig = field(default_factory=KdsConfig)
    strategy: str = "kds"
    seed: int = 0
    export_images: bool = False
    parallelism: int = 1

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")


def parse_flat_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse ``key = value`` lines into a string mapping."""
    mapping: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"{source}: line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ParseError(f"{source}: line {lineno}: empty key or value")
        mapping[key] = value
    return mapping


def parse_flat_file(path: str | Path) -> dict[str, str]:
    path = Path(path)
    return parse_flat_text(path.read_text(), source=str(path))


def build_pipeline_config(raw: dict[str, str]) -> PipelineConfig:
    """Typed PipelineConfig from string key/value pairs, defaults filled in."""
    values: dict[str, object] = {}
    for key, text in raw.items():
        if key not in _KEY_TYPES:
            raise ParseError(f"unknown config key {key!r}")
        try:
            values[key] = _KEY_TYPES[key](text)
        except ValueError as exc:
            raise ParseError(f"config key {key!r}: {exc}") from exc

    def a(key, default):
        return values.get(key, default)

    return PipelineConfig(
        spatial=SpatialConfig(
            kernel_half_width=a("spatial.kernel_half_width", 2),
            threshold=a("spatial.threshold", 0.1),
            output_height=a("spatial.output_height", 384),
            output_width=a("spatial.output_width", 384),
        ),
        slices=SliceConfig(
            window_fraction=a("slice.window_fraction", 0.5),
            alpha=a("slice.alpha", 0.7),
        ),
        kds=KdsConfig(
            num_samples=a("kds.num_samples", 8),
            grid_size=a("kds.grid_size", 100),
        ),
        strategy=a("strategy", "kds"),
        seed=a("seed", 0),
        export_images=a("export_images", False),
        parallelism=a("jobs", 1),
    )


def apply_overrides(raw: dict[str, str], assignments) -> dict[str, str]:
    """Merge ``key=value`` strings (from --set) over a parsed mapping."""
    merged = dict(raw)
    for item in assignments:
        if "=" not in item:
            raise ParseError(f"--set expects key=value, got {item!r}")
        key, value = (part.strip() for part in item.split("=", 1))
        if not key or not value:
            raise ParseError(f"--set expects key=value, got {item!r}")
        merged[key] = value
    return merged
