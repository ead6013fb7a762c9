import json

import numpy as np
import pytest

from ctslim import generate_corpus, run_pipeline
from ctslim.cli import main
from ctslim.config import apply_overrides, build_pipeline_config, parse_flat_text
from ctslim.errors import NoScans, ParseError
from ctslim.pipeline import build_report, read_labels_csv

CORPUS_SPEC = """
# small deterministic fixture
num_scans = 4
num_slices = 16:24
image_size = 64
body_margin = 6:9
lung_area_peak = 200:300
lung_area_curve = 5.0
noise_amplitude = 0
seed = 13
"""


@pytest.fixture()
def corpus(tmp_path):
    spec = tmp_path / "corpus.spec"
    spec.write_text(CORPUS_SPEC)
    root = tmp_path / "corpus"
    generate_corpus(spec, root)
    return root


def fast_config(**kw):
    raw = {"spatial.kernel_half_width": "0", "kds.num_samples": "4"}
    raw.update({k: str(v) for k, v in kw.items()})
    return build_pipeline_config(raw)


# --- config -----------------------------------------------------------------

def test_config_defaults():
    cfg = build_pipeline_config({})
    assert cfg.spatial.kernel_half_width == 2
    assert cfg.spatial.threshold == 0.1
    assert cfg.slices.window_fraction == 0.5
    assert cfg.slices.alpha == 0.7
    assert cfg.kds.num_samples == 8
    assert cfg.kds.grid_size == 100
    assert cfg.strategy == "kds"
    assert cfg.parallelism == 1
    assert not cfg.export_images


def test_config_file_parsing():
    text = """
    # comment line
    spatial.threshold = 0.25
    strategy = systematic   # trailing comment
    seed = 42
    export_images = true
    """
    cfg = build_pipeline_config(parse_flat_text(text))
    assert cfg.spatial.threshold == 0.25
    assert cfg.strategy == "systematic"
    assert cfg.seed == 42
    assert cfg.export_images


def test_config_rejects_unknown_key():
    with pytest.raises(ParseError):
        build_pipeline_config({"spatial.radius": "3"})


def test_config_rejects_bad_value():
    with pytest.raises(ParseError):
        build_pipeline_config({"seed": "abc"})
    with pytest.raises(ParseError):
        parse_flat_text("just some words\n")


def test_config_overrides():
    raw = parse_flat_text("seed = 1\nstrategy = random\n")
    merged = apply_overrides(raw, ["seed=9", "jobs=4"])
    cfg = build_pipeline_config(merged)
    assert cfg.seed == 9
    assert cfg.strategy == "random"
    assert cfg.parallelism == 4


def test_labels_csv(tmp_path):
    path = tmp_path / "labels.csv"
    path.write_text("scan_id,label\nscan_0000,covid\nscan_0001,non-covid\n")
    assert read_labels_csv(path) == {"scan_0000": "covid", "scan_0001": "non-covid"}


# --- run_pipeline -----------------------------------------------------------

def test_manifest_completeness(corpus):
    result = run_pipeline(corpus, fast_config())
    assert len(result.manifests) == 4
    assert not result.failures
    for m in result.manifests:
        window_len = m.window["e"] - m.window["s"] + 1
        assert len(m.sampled_indices) == min(4, window_len)
        assert all(m.window["s"] <= i <= m.window["e"] for i in m.sampled_indices)
        assert len(m.areas) == m.original_dims["num_slices"]


def test_single_scan_report_identity(corpus):
    result = run_pipeline(corpus, fast_config())
    m = result.manifests[0]
    report = build_report([m])
    g = report.groups["corpus"]
    assert g.spatial_area_before == m.original_dims["width"] * m.original_dims["height"]
    assert g.spatial_area_after == (
        (m.crop_box["x_max"] - m.crop_box["x_min"] + 1)
        * (m.crop_box["y_max"] - m.crop_box["y_min"] + 1)
    )
    assert g.slice_len_before == m.original_dims["num_slices"]
    assert g.slice_len_after == m.window["e"] - m.window["s"] + 1


def _manifest(scan_id, dims, box_extent, num_slices, window_len):
    from ctslim.pipeline import ScanManifest
    return ScanManifest(
        scan_id=scan_id,
        original_dims={"width": dims, "height": dims, "num_slices": num_slices},
        crop_box={"x_min": 0, "x_max": box_extent - 1, "y_min": 0, "y_max": box_extent - 1},
        window={"s": 0, "e": window_len - 1, "area_sum": 1, "area_fraction": 1.0,
                "alpha_satisfied": True},
        sampled_indices=[0],
        strategy="kds",
        seed=0,
        areas=[1] * num_slices,
    )


def test_report_uses_mean_then_ratio():
    # scans with unequal sizes distinguish the two averaging orders
    manifests = [
        _manifest("a", dims=100, box_extent=50, num_slices=40, window_len=21),
        _manifest("b", dims=200, box_extent=180, num_slices=100, window_len=51),
    ]
    g = build_report(manifests).groups["corpus"]
    before = [100 * 100, 200 * 200]
    after = [50 * 50, 180 * 180]
    assert g.spatial_delta == pytest.approx(1 - np.mean(after) / np.mean(before))
    ratio_then_mean = 1 - np.mean([a / b for a, b in zip(after, before)])
    assert abs(g.spatial_delta - ratio_then_mean) > 1e-3
    # product-of-means layout factors exactly
    assert (1 - g.total_delta) == pytest.approx(
        (1 - g.spatial_delta) * (1 - g.slice_delta), abs=1e-12)


def test_report_label_groups(corpus, tmp_path):
    labels = {"scan_0000": "covid", "scan_0001": "covid",
              "scan_0002": "non-covid", "scan_0003": "non-covid"}
    result = run_pipeline(corpus, fast_config(), labels=labels)
    assert set(result.report.groups) == {"corpus", "covid", "non-covid"}
    assert result.report.groups["covid"].num_scans == 2


def test_report_unlabeled_scans_stay_in_corpus_group(corpus):
    # scans missing from the labels file still count in the corpus group
    labels = {"scan_0001": "covid"}
    result = run_pipeline(corpus, fast_config(), labels=labels)
    assert result.report.groups["corpus"].num_scans == 4
    assert result.report.groups["covid"].num_scans == 1


def test_pipeline_outputs_on_disk(corpus, tmp_path):
    out = tmp_path / "out"
    result = run_pipeline(corpus, fast_config(), out_dir=out)
    manifest_files = sorted((out / "manifests").glob("*.json"))
    assert [p.stem for p in manifest_files] == [m.scan_id for m in result.manifests]
    index_lines = (out / "manifest_index.jsonl").read_text().splitlines()
    assert len(index_lines) == 4
    assert json.loads(index_lines[0])["scan_id"] == "scan_0000"
    report = json.loads((out / "report.json").read_text())
    assert "corpus" in report["groups"]
    summary = json.loads((out / "run_summary.json").read_text())
    assert summary == {"processed": 4, "failed": 0, "failures": {}}


def _run_and_read(corpus, out, **cfg):
    run_pipeline(corpus, fast_config(**cfg), out_dir=out)
    return {p.relative_to(out).as_posix(): p.read_bytes()
            for p in sorted(out.rglob("*")) if p.is_file()}


def test_parallelism_does_not_change_outputs(corpus, tmp_path):
    serial = _run_and_read(corpus, tmp_path / "serial", jobs=1)
    parallel = _run_and_read(corpus, tmp_path / "parallel", jobs=8)
    assert serial == parallel


def test_export_images_does_not_change_manifests(corpus, tmp_path):
    plain = _run_and_read(corpus, tmp_path / "plain")
    with_images = _run_and_read(corpus, tmp_path / "export", export_images=True)
    exported = [k for k in with_images if k.startswith("slices/")]
    assert exported  # images actually written
    assert {k: v for k, v in with_images.items() if not k.startswith("slices/")} == plain


def test_empty_corpus(tmp_path):
    empty = tmp_path / "nothing"
    empty.mkdir()
    with pytest.raises(NoScans):
        run_pipeline(empty, fast_config())


def test_corrupt_scan_is_skipped(corpus):
    for png in (corpus / "scan_0002").glob("*.png"):
        png.write_bytes(b"garbage")
        break
    result = run_pipeline(corpus, fast_config())
    assert len(result.manifests) == 3
    assert list(result.failures) == ["scan_0002"]
    assert "DecodeError" in result.failures["scan_0002"]


def test_default_config_on_noisy_corpus(tmp_path):
    # the stock settings (k=2, t=0.1) must cope with speckled fixtures;
    # no exactness claims here, just sane geometry
    spec = tmp_path / "noisy.spec"
    spec.write_text("num_scans = 2\nnum_slices = 20\nimage_size = 80\n"
                    "body_margin = 10\nlung_area_peak = 400\n"
                    "lung_area_curve = 4.0\nnoise_amplitude = 6\nseed = 17\n")
    corpus = tmp_path / "noisy"
    generate_corpus(spec, corpus)
    result = run_pipeline(corpus, build_pipeline_config({}))
    assert len(result.manifests) == 2 and not result.failures
    for m in result.manifests:
        assert 0 < m.crop_box["x_max"] - m.crop_box["x_min"] + 1 <= 80
        assert max(m.areas) > 0
        assert m.window["area_fraction"] > 0.5


def test_sixteen_bit_corpus_end_to_end(tmp_path):
    spec = tmp_path / "c16.spec"
    spec.write_text("num_scans = 2\nnum_slices = 8\nimage_size = 60\n"
                    "body_margin = 7\nlung_area_peak = 120\n"
                    "lung_area_curve = 2.0\nbit_depth = 16\nseed = 3\n")
    corpus = tmp_path / "c16"
    generate_corpus(spec, corpus)
    result = run_pipeline(corpus, fast_config())
    assert len(result.manifests) == 2
    truth = json.loads((corpus / "scan_0000" / "truth.json").read_text())
    m = result.manifests[0]
    box = [m.crop_box["x_min"], m.crop_box["x_max"],
           m.crop_box["y_min"], m.crop_box["y_max"]]
    assert box == truth["crop_boxes"][0]
    assert m.areas == truth["lung_areas"]


def test_gen_corpus_deterministic(tmp_path):
    spec = tmp_path / "c.spec"
    spec.write_text(CORPUS_SPEC)
    a, b = tmp_path / "a", tmp_path / "b"
    generate_corpus(spec, a)
    generate_corpus(spec, b)
    files_a = {p.relative_to(a).as_posix(): p.read_bytes() for p in sorted(a.rglob("*")) if p.is_file()}
    files_b = {p.relative_to(b).as_posix(): p.read_bytes() for p in sorted(b.rglob("*")) if p.is_file()}
    assert files_a == files_b
    truth = json.loads((a / "scan_0000" / "truth.json").read_text())
    assert set(truth) == {"crop_boxes", "lung_areas"}


# --- CLI --------------------------------------------------------------------

def test_cli_reduce_end_to_end(corpus, tmp_path, capsys):
    out = tmp_path / "cliout"
    code = main([
        "reduce", "--corpus", str(corpus), "--out", str(out),
        "--set", "spatial.kernel_half_width=0",
        "--strategy", "systematic", "--samples", "3", "--seed", "7", "--jobs", "2",
    ])
    assert code == 0
    printed = capsys.readouterr().out
    assert "corpus" in printed and "scans processed: 4" in printed
    manifest = json.loads((out / "manifests" / "scan_0000.json").read_text())
    assert manifest["strategy"] == "systematic"
    assert manifest["seed"] == 7
    assert len(manifest["sampled_indices"]) == 3


def test_cli_config_file(corpus, tmp_path):
    cfg = tmp_path / "pipeline.cfg"
    cfg.write_text("spatial.kernel_half_width = 0\nstrategy = random\n"
                   "kds.num_samples = 2\nseed = 31\n")
    out = tmp_path / "cfgout"
    code = main(["reduce", "--corpus", str(corpus), "--out", str(out),
                 "--config", str(cfg)])
    assert code == 0
    manifest = json.loads((out / "manifests" / "scan_0000.json").read_text())
    assert manifest["strategy"] == "random"
    assert manifest["seed"] == 31
    assert len(manifest["sampled_indices"]) == 2


def test_cli_flags_beat_set_overrides(corpus, tmp_path):
    out = tmp_path / "flagout"
    code = main([
        "reduce", "--corpus", str(corpus), "--out", str(out),
        "--set", "seed=1", "--set", "spatial.kernel_half_width=0", "--seed", "99",
    ])
    assert code == 0
    manifest = json.loads((out / "manifests" / "scan_0000.json").read_text())
    assert manifest["seed"] == 99


def test_cli_empty_corpus_exit_2(tmp_path, capsys):
    empty = tmp_path / "void"
    empty.mkdir()
    code = main(["reduce", "--corpus", str(empty), "--out", str(tmp_path / "o")])
    assert code == 2


def test_cli_partial_failure_exit_1(corpus, tmp_path):
    for png in (corpus / "scan_0001").glob("*.png"):
        png.write_bytes(b"garbage")
        break
    code = main([
        "reduce", "--corpus", str(corpus), "--out", str(tmp_path / "o"),
        "--set", "spatial.kernel_half_width=0",
    ])
    assert code == 1


def test_cli_gen_corpus_and_score(tmp_path, capsys):
    spec = tmp_path / "c.spec"
    spec.write_text("num_scans = 1\nnum_slices = 4\nimage_size = 40\n"
                    "body_margin = 4\nlung_area_peak = 50\nlung_area_curve = 2.0\n")
    code = main(["gen-corpus", "--spec", str(spec), "--out", str(tmp_path / "c")])
    assert code == 0
    assert (tmp_path / "c" / "scan_0000" / "truth.json").exists()

    preds = tmp_path / "p.csv"
    preds.write_text("a,covid,covid\nb,non-covid,non-covid\n")
    capsys.readouterr()
    assert main(["score", str(preds)]) == 0
    printed = capsys.readouterr().out
    assert "f1[covid] = 1.0000" in printed
    assert "macro_f1 = 1.0000" in printed


def test_cli_usage_error_exit_2(capsys):
    assert main(["reduce"]) == 2  # missing required flags
