"""Grading: confusion counts, accuracy/precision/recall/F1 and policy-size ratio.

All metrics are exact ``Fraction`` values; floats appear only at the
serialization boundary.

Degenerate denominators:

* precision is 1 when nothing is predicted positive *and* nothing is
  actually positive, and 0 when nothing is predicted positive but the
  original has permits;
* recall is 1 when the original has no permits;
* F1 is 0 whenever precision + recall is 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction

import numpy as np

from .errors import DimensionMismatch, InvalidCounts
from .model import AccessMatrix

__all__ = [
    "ConfusionCounts",
    "MetricsReport",
    "confusion",
    "score",
    "grade",
    "CSV_FIELDS",
    "round_half_up",
]

CSV_FIELDS = (
    "scenario_id",
    "strategy",
    "provider",
    "density",
    "mined_size",
    "ratio",
    "accuracy",
    "precision",
    "recall",
    "f1",
    "failed_flag",
)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        for name in ("tp", "tn", "fp", "fn"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 0:
                raise InvalidCounts(f"{name} must be a non-negative integer, got {v!r}")
            object.__setattr__(self, name, int(v))

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def scaled(self, k: int) -> "ConfusionCounts":
        return ConfusionCounts(self.tp * k, self.tn * k, self.fp * k, self.fn * k)


def confusion(original: AccessMatrix, reconstructed: AccessMatrix) -> ConfusionCounts:
    a = np.asarray(original.cells if isinstance(original, AccessMatrix) else original, dtype=bool)
    b = np.asarray(reconstructed.cells if isinstance(reconstructed, AccessMatrix) else reconstructed, dtype=bool)
    if a.shape != b.shape:
        raise DimensionMismatch(f"original is {a.shape}, reconstructed is {b.shape}")
    return ConfusionCounts(
        tp=int(np.count_nonzero(a & b)),
        tn=int(np.count_nonzero(~a & ~b)),
        fp=int(np.count_nonzero(~a & b)),
        fn=int(np.count_nonzero(a & ~b)),
    )


def round_half_up(x: Fraction, places: int = 1) -> Decimal:
    q = Decimal(1).scaleb(-places)
    return (Decimal(x.numerator) / Decimal(x.denominator)).quantize(q, rounding=ROUND_HALF_UP)


@dataclass(frozen=True)
class MetricsReport:
    counts: ConfusionCounts
    accuracy: Fraction
    precision: Fraction
    recall: Fraction
    f1: Fraction
    size_ratio: Fraction
    mined_size: int
    ground_truth_size: int

    @property
    def ratio_rounded(self) -> Decimal:
        """Size ratio to one decimal, the form used in summary tables."""
        return round_half_up(self.size_ratio, 1)

    @property
    def is_perfect(self) -> bool:
        return self.accuracy == self.precision == self.recall == self.f1 == 1

    def to_dict(self) -> dict:
        c = self.counts
        return {
            "tp": c.tp,
            "tn": c.tn,
            "fp": c.fp,
            "fn": c.fn,
            "accuracy": float(self.accuracy),
            "precision": float(self.precision),
            "recall": float(self.recall),
            "f1": float(self.f1),
            "size_ratio": float(self.size_ratio),
            "size_ratio_rounded": str(self.ratio_rounded),
            "mined_size": self.mined_size,
            "ground_truth_size": self.ground_truth_size,
            "exact": {
                k: str(getattr(self, k)) for k in ("accuracy", "precision", "recall", "f1", "size_ratio")
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def score(counts: ConfusionCounts, mined_size: int, ground_truth_size: int) -> MetricsReport:
    if not isinstance(counts, ConfusionCounts):
        raise InvalidCounts("counts must be a ConfusionCounts")
    if counts.total == 0:
        raise InvalidCounts("counts describe an empty matrix")
    if ground_truth_size < 1:
        raise InvalidCounts("ground_truth_size must be >= 1")
    if mined_size < 0:
        raise InvalidCounts("mined_size must be >= 0")
    tp, tn, fp, fn = counts.tp, counts.tn, counts.fp, counts.fn

    accuracy = Fraction(tp + tn, counts.total)
    if tp + fp == 0:
        precision = Fraction(1) if tp + fn == 0 else Fraction(0)
    else:
        precision = Fraction(tp, tp + fp)
    recall = Fraction(1) if tp + fn == 0 else Fraction(tp, tp + fn)
    f1 = Fraction(0) if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return MetricsReport(
        counts=counts,
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f1=f1,
        size_ratio=Fraction(mined_size, ground_truth_size),
        mined_size=mined_size,
        ground_truth_size=ground_truth_size,
    )


def grade(scenario, policy, semantics=None) -> MetricsReport:
    """Reconstruct the ACM from ``policy`` and score it against ``scenario``."""
    from .engine import Semantics, reconstruct_acm

    if semantics is None:
        semantics = Semantics.DENY_OVERRIDES if policy.has_deny else Semantics.PERMIT_ONLY
    rebuilt = reconstruct_acm(policy, scenario.subjects, scenario.objects, semantics)
    return score(confusion(scenario.acm, rebuilt), len(policy), len(scenario.ground_truth))


def csv_row(report, scenario_id: str, strategy: str, provider: str, density) -> dict:
    """Flat CSV record; ``report=None`` marks a failed (``*``) run."""
    row = {
        "scenario_id": scenario_id,
        "strategy": strategy,
        "provider": provider,
        "density": f"{float(density):.4f}",
    }
    if report is None:
        row.update({k: "" for k in ("mined_size", "ratio", "accuracy", "precision", "recall", "f1")})
        row["failed_flag"] = "1"
        return row
    row.update(
        {
            "mined_size": str(report.mined_size),
            "ratio": _fmt(report.size_ratio),
            "accuracy": _fmt(report.accuracy),
            "precision": _fmt(report.precision),
            "recall": _fmt(report.recall),
            "f1": _fmt(report.f1),
            "failed_flag": "0",
        }
    )
    return row


def _fmt(x: Fraction) -> str:
    return f"{float(x):.6f}"
