"""Command-line interface: ``ctslim reduce | gen-corpus | score``.

Exit codes: 0 success, 1 partial (some scans failed), 2 usage error or
empty corpus.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import apply_overrides, build_pipeline_config, parse_flat_file
from .errors import CtslimError, NoScans, ParseError
from .kds import STRATEGIES
from .metrics import score_predictions
from .pipeline import generate_corpus, read_labels_csv, run_pipeline

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_USAGE = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctslim",
        description="Remove redundant spatial regions and slices from CT scans,"
                    " then sample slices density-aware.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    reduce_p = sub.add_parser("reduce", help="run the reduction pipeline over a corpus")
    reduce_p.add_argument("--corpus", required=True, help="corpus root directory")
    reduce_p.add_argument("--out", required=True, help="output directory")
    reduce_p.add_argument("--config", help="flat key/value config file")
    reduce_p.add_argument("--set", dest="overrides", action="append", default=[],
                          metavar="KEY=VALUE", help="override one config key")
    reduce_p.add_argument("--strategy", choices=STRATEGIES)
    reduce_p.add_argument("--samples", type=int, metavar="M")
    reduce_p.add_argument("--seed", type=int)
    reduce_p.add_argument("--jobs", type=int, metavar="N")
    reduce_p.add_argument("--export-images", action="store_true", default=None)
    reduce_p.add_argument("--labels", help="optional scan_id,label CSV for report groups")

    gen_p = sub.add_parser("gen-corpus", help="write a synthetic corpus with ground truth")
    gen_p.add_argument("--spec", required=True, help="corpus spec file (flat key/value)")
    gen_p.add_argument("--out", required=True, help="corpus output directory")

    score_p = sub.add_parser("score", help="score a scan_id,label,prediction CSV")
    score_p.add_argument("predictions_csv")
    return parser


def _reduce(args) -> int:
    raw = parse_flat_file(args.config) if args.config else {}
    raw = apply_overrides(raw, args.overrides)
    # Dedicated flags win over --set, which wins over the file.
    if args.strategy is not None:
        raw["strategy"] = args.strategy
    if args.samples is not None:
        raw["kds.num_samples"] = str(args.samples)
    if args.seed is not None:
        raw["seed"] = str(args.seed)
    if args.jobs is not None:
        raw["jobs"] = str(args.jobs)
    if args.export_images:
        raw["export_images"] = "true"
    config = build_pipeline_config(raw)

    labels = read_labels_csv(args.labels) if args.labels else None
    result = run_pipeline(args.corpus, config, out_dir=Path(args.out), labels=labels)
    print(result.report.table())
    print(f"scans processed: {len(result.manifests)}, failed: {len(result.failures)}")
    return EXIT_PARTIAL if result.failures else EXIT_OK


def _gen_corpus(args) -> int:
    scan_ids = generate_corpus(args.spec, args.out)
    print(f"wrote {len(scan_ids)} scan(s) to {args.out}")
    return EXIT_OK


def _score(args) -> int:
    scores = score_predictions(args.predictions_csv)
    for name, value in scores.items():
        print(f"{name} = {value:.4f}")
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors already
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    try:
        if args.command == "reduce":
            return _reduce(args)
        if args.command == "gen-corpus":
            return _gen_corpus(args)
        return _score(args)
    except (NoScans, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CtslimError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
