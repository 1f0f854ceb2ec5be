"""Detection metrics, exact-match accuracies, calibration loss, and reports."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

from .errors import AlignmentError, EmptyEvaluation, EmptySubset, LengthMismatch
from .model import GroundTruthLabel, PvAssessment

BCE_EPS = 1e-12


class Prediction(NamedTuple):
    tile_id: str
    assessment: PvAssessment


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def inverted(self) -> "ConfusionCounts":
        """Counts with the negative class treated as positive."""
        return ConfusionCounts(tp=self.tn, fp=self.fn, fn=self.fp, tn=self.tp)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    accuracy: float
    support: int
    degenerate: bool = False

    def to_json(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "accuracy": self.accuracy,
            "support": self.support,
            "degenerate": self.degenerate,
        }


@dataclass
class MetricsReport:
    region: str
    solar: ClassMetrics
    no_solar: ClassMetrics
    weighted: ClassMetrics
    location_accuracy_solar: float
    location_accuracy_all: float
    quantity_accuracy_solar: float
    quantity_accuracy_all: float
    calibration_bce: float

    def to_json(self) -> dict:
        return {
            "region": self.region,
            "solar": self.solar.to_json(),
            "no_solar": self.no_solar.to_json(),
            "weighted": self.weighted.to_json(),
            "location_accuracy_solar": self.location_accuracy_solar,
            "location_accuracy_all": self.location_accuracy_all,
            "quantity_accuracy_solar": self.quantity_accuracy_solar,
            "quantity_accuracy_all": self.quantity_accuracy_all,
            "calibration_bce": self.calibration_bce,
        }


def _check_alignment(preds: list, truths: list):
    if len(preds) != len(truths):
        raise AlignmentError(f"length mismatch: {len(preds)} predictions vs {len(truths)} truths")
    for pred, truth in zip(preds, truths):
        if pred.tile_id != truth.tile_id:
            raise AlignmentError(f"tile id mismatch: {pred.tile_id} vs {truth.tile_id}")


def confusion(preds: list, truths: list) -> ConfusionCounts:
    """Presence confusion with "Solar" as the positive class."""
    _check_alignment(preds, truths)
    tp = fp = fn = tn = 0
    for pred, truth in zip(preds, truths):
        if truth.present and pred.assessment.present:
            tp += 1
        elif truth.present:
            fn += 1
        elif pred.assessment.present:
            fp += 1
        else:
            tn += 1
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn)


def class_metrics(c: ConfusionCounts) -> ClassMetrics:
    """Precision/recall/F1 for the positive class; per-class accuracy = recall.

    Zero denominators yield 0 with the degenerate flag set.
    """
    degenerate = False
    if c.tp + c.fp > 0:
        precision = c.tp / (c.tp + c.fp)
    else:
        precision, degenerate = 0.0, True
    if c.tp + c.fn > 0:
        recall = c.tp / (c.tp + c.fn)
    else:
        recall, degenerate = 0.0, True
    f1 = f1_score(precision, recall)
    return ClassMetrics(
        precision=precision,
        recall=recall,
        f1=f1,
        accuracy=recall,
        support=c.tp + c.fn,
        degenerate=degenerate,
    )


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean; 0 when precision + recall is 0."""
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def weighted_average(solar: ClassMetrics, no_solar: ClassMetrics) -> ClassMetrics:
    total = solar.support + no_solar.support
    if total == 0:
        raise EmptyEvaluation("both class supports are zero")

    def mix(a, b):
        return (solar.support * a + no_solar.support * b) / total

    return ClassMetrics(
        precision=mix(solar.precision, no_solar.precision),
        recall=mix(solar.recall, no_solar.recall),
        f1=mix(solar.f1, no_solar.f1),
        accuracy=mix(solar.accuracy, no_solar.accuracy),
        support=total,
        degenerate=solar.degenerate or no_solar.degenerate,
    )


def exact_match_accuracy(field_name: str, preds: list, truths: list, subset: str = "all") -> float:
    """Fraction of pairs whose categorical field values are identical."""
    if field_name not in ("location", "quantity"):
        raise ValueError(f"unknown field: {field_name}")
    if subset not in ("solar_only", "all"):
        raise ValueError(f"unknown subset: {subset}")
    _check_alignment(preds, truths)
    pairs = list(zip(preds, truths))
    if subset == "solar_only":
        pairs = [(p, t) for p, t in pairs if t.present]
    if not pairs:
        raise EmptySubset(f"no pairs in subset {subset}")
    hits = 0
    for pred, truth in pairs:
        if getattr(pred.assessment, field_name) is getattr(truth, field_name):
            hits += 1
    return hits / len(pairs)


def bce_loss(probs: list, labels: list) -> float:
    """Binary cross-entropy with probabilities clamped to [eps, 1-eps]."""
    if len(probs) != len(labels):
        raise LengthMismatch(f"{len(probs)} probs vs {len(labels)} labels")
    if not probs:
        raise LengthMismatch("empty inputs")
    total = 0.0
    for p, y in zip(probs, labels):
        p = min(max(p, BCE_EPS), 1.0 - BCE_EPS)
        total += y * math.log(p) + (1 - y) * math.log(1 - p)
    return -total / len(probs)


def compute_report(preds: list, truths: list, region: str = "all") -> MetricsReport:
    """Full region report from aligned prediction/truth lists."""
    _check_alignment(preds, truths)
    if not preds:
        raise EmptyEvaluation("nothing to evaluate")
    c = confusion(preds, truths)
    solar = class_metrics(c)
    no_solar = class_metrics(c.inverted())
    weighted = weighted_average(solar, no_solar)

    def safe_exact(field_name, subset):
        try:
            return exact_match_accuracy(field_name, preds, truths, subset)
        except EmptySubset:
            return 0.0

    return MetricsReport(
        region=region,
        solar=solar,
        no_solar=no_solar,
        weighted=weighted,
        location_accuracy_solar=safe_exact("location", "solar_only"),
        location_accuracy_all=safe_exact("location", "all"),
        quantity_accuracy_solar=safe_exact("quantity", "solar_only"),
        quantity_accuracy_all=safe_exact("quantity", "all"),
        calibration_bce=bce_loss(
            [p.assessment.likelihood for p in preds],
            [1 if t.present else 0 for t in truths],
        ),
    )


def render_report(report: MetricsReport, format: str = "csv") -> str:
    """CSV rows Solar / No Solar / Weighted Average with two-decimal percents,
    or JSON mirroring the report structure."""
    if format == "json":
        return json.dumps(report.to_json(), indent=2)
    if format != "csv":
        raise ValueError(f"unknown format: {format}")
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["region", "class", "precision", "recall", "f1", "accuracy"])
    for name, m in (("Solar", report.solar), ("No Solar", report.no_solar), ("Weighted Average", report.weighted)):
        writer.writerow(
            [report.region, name]
            + [f"{value * 100:.2f}" for value in (m.precision, m.recall, m.f1, m.accuracy)]
        )
    return buf.getvalue()
