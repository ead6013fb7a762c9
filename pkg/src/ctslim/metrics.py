"""Per-class F1 and macro-F1 for scoring downstream prediction files."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .errors import NoClasses, ParseError

DEFAULT_CLASSES = ("covid", "non-covid")


@dataclass(frozen=True)
class ClassCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0


@dataclass(frozen=True)
class ConfusionCounts:
    """True-positive / false-positive / false-negative counts per class."""

    per_class: dict[str, ClassCounts]

    @classmethod
    def from_pairs(cls, pairs, classes=None) -> "ConfusionCounts":
        """Tally (label, prediction) pairs.

        ``classes`` defaults to the union of labels and predictions seen,
        sorted for determinism.
        """
        pairs = list(pairs)
        if classes is None:
            classes = sorted({lab for lab, _ in pairs} | {pred for _, pred in pairs})
        counts = {}
        for c in classes:
            tp = sum(1 for lab, pred in pairs if lab == c and pred == c)
            fp = sum(1 for lab, pred in pairs if lab != c and pred == c)
            fn = sum(1 for lab, pred in pairs if lab == c and pred != c)
            counts[c] = ClassCounts(tp=tp, fp=fp, fn=fn)
        return cls(per_class=counts)


def f1_score(counts: ConfusionCounts, cls: str) -> float:
    """Harmonic mean of precision and recall for one class.

    Degenerate denominators (no predicted positives, no actual positives,
    or P + R = 0) map to 0 by convention, keeping the macro average defined.
    """
    c = counts.per_class[cls]
    if c.tp + c.fp == 0 or c.tp + c.fn == 0:
        return 0.0
    precision = c.tp / (c.tp + c.fp)
    recall = c.tp / (c.tp + c.fn)
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def macro_f1(counts: ConfusionCounts) -> float:
    """Unweighted mean of per-class F1 scores."""
    if not counts.per_class:
        raise NoClasses("no classes to average over")
    scores = [f1_score(counts, c) for c in counts.per_class]
    return sum(scores) / len(scores)


def read_predictions_csv(path: str | Path) -> list[tuple[str, str, str]]:
    """Read ``scan_id,label,prediction`` rows; a matching header is skipped.

    Raises ParseError with the 1-based line number for malformed rows.
    """
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue  # blank line
            if len(row) != 3:
                raise ParseError(f"{path}: line {lineno}: expected 3 fields, got {len(row)}")
            scan_id, label, prediction = (field.strip() for field in row)
            if lineno == 1 and (label, prediction) == ("label", "prediction"):
                continue
            if not scan_id or not label or not prediction:
                raise ParseError(f"{path}: line {lineno}: empty field")
            rows.append((scan_id, label, prediction))
    return rows


def score_predictions(path: str | Path) -> dict[str, float]:
    """Per-class F1 plus macro-F1 for a predictions CSV."""
    rows = read_predictions_csv(path)
    counts = ConfusionCounts.from_pairs([(lab, pred) for _, lab, pred in rows])
    result = {f"f1[{c}]": f1_score(counts, c) for c in counts.per_class}
    result["macro_f1"] = macro_f1(counts)
    return result
