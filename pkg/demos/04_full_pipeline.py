"""
Full corpus pipeline
====================

Generates a small synthetic corpus on disk, runs the whole reduction
pipeline over it (crop -> window -> sample), and prints the per-group
redundancy report plus one scan manifest.  The same flow is available
from the command line:

    ctslim gen-corpus --spec corpus.spec --out corpus/
    ctslim reduce --corpus corpus/ --out results/ --strategy kds --samples 8
"""

import json
import tempfile
from pathlib import Path

from ctslim import generate_corpus, run_pipeline
from ctslim.config import build_pipeline_config
from ctslim.pipeline import read_labels_csv

workdir = Path(tempfile.mkdtemp(prefix="ctslim_demo_"))
print(f"working in {workdir}")

spec = workdir / "corpus.spec"
spec.write_text("""
num_scans = 6
num_slices = 60:90
image_size = 100
body_margin = 9:13
lung_area_peak = 500:900
lung_area_curve = 12.0
noise_amplitude = 3
seed = 11
""")
corpus = workdir / "corpus"
scan_ids = generate_corpus(spec, corpus)
print(f"generated {len(scan_ids)} scans")

# Label half the scans "covid" to get per-label report groups, as the
# published redundancy tables break out.
labels_csv = workdir / "labels.csv"
labels_csv.write_text("scan_id,label\n" + "\n".join(
    f"{sid},{'covid' if i % 2 else 'non-covid'}" for i, sid in enumerate(scan_ids)
) + "\n")

config = build_pipeline_config({
    "strategy": "kds",
    "kds.num_samples": "8",
    "seed": "5",
    "jobs": "4",
})
result = run_pipeline(corpus, config, out_dir=workdir / "results",
                      labels=read_labels_csv(labels_csv))

print("\nredundancy report (delta = fraction removed):\n")
print(result.report.table())

manifest = result.manifests[0]
print(f"\nmanifest for {manifest.scan_id}:")
print(json.dumps(manifest.to_dict(), indent=2)[:800], "...")
print(f"\nall outputs under {workdir / 'results'}")
