"""Confidence-driven triage, likelihood distribution analytics, review queue."""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import AlreadyResolved, EmptyClass, NotFound
from .model import GroundTruthLabel, PvAssessment, assessment_from_json, assessment_to_json

KDE_GRID_POINTS = 201
DECISION_BOUNDARY = 0.5


@dataclass(frozen=True)
class TriageConfig:
    confidence_threshold: float = 0.8
    likelihood_margin: float = 0.1
    decision_boundary: float = DECISION_BOUNDARY

    def __post_init__(self):
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise ValueError(f"confidence_threshold out of [0,1]: {self.confidence_threshold}")
        if not 0.0 <= self.likelihood_margin < 0.5:
            raise ValueError(f"likelihood_margin out of [0,0.5): {self.likelihood_margin}")

    def to_json(self) -> dict:
        return {
            "confidence_threshold": self.confidence_threshold,
            "likelihood_margin": self.likelihood_margin,
            "decision_boundary": self.decision_boundary,
        }


@dataclass
class ReviewItem:
    tile_id: str
    prediction: Optional[PvAssessment]
    status: str = "pending"  # pending | corrected | confirmed
    correction: Optional[GroundTruthLabel] = None
    reviewer: Optional[str] = None
    updated_at: str = ""

    def to_json(self) -> dict:
        return {
            "tile_id": self.tile_id,
            "prediction": assessment_to_json(self.prediction) if self.prediction else None,
            "status": self.status,
            "correction": self.correction.to_json() if self.correction else None,
            "reviewer": self.reviewer,
            "updated_at": self.updated_at,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ReviewItem":
        return cls(
            tile_id=obj["tile_id"],
            prediction=assessment_from_json(obj["prediction"]) if obj.get("prediction") else None,
            status=obj.get("status", "pending"),
            correction=GroundTruthLabel.from_json(obj["correction"]) if obj.get("correction") else None,
            reviewer=obj.get("reviewer"),
            updated_at=obj.get("updated_at", ""),
        )


@dataclass
class DistributionSummary:
    median_likelihood_true: float
    median_likelihood_false: float
    kde_grid: list  # [(x, density), ...]
    bandwidth: float

    def to_json(self) -> dict:
        return {
            "median_likelihood_true": self.median_likelihood_true,
            "median_likelihood_false": self.median_likelihood_false,
            "kde_grid": [[x, d] for x, d in self.kde_grid],
            "bandwidth": self.bandwidth,
        }


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def triage(a: PvAssessment, cfg: TriageConfig) -> str:
    """Route one assessment: "Review" on low confidence or a likelihood too
    close to the 0.5 decision boundary, else "AutoAccept" (either class)."""
    if a.confidence < cfg.confidence_threshold:
        return "Review"
    # Round kills float noise at the boundary (0.60 - 0.5 is 0.0999...98).
    if round(abs(a.likelihood - cfg.decision_boundary), 9) < cfg.likelihood_margin:
        return "Review"
    return "AutoAccept"


def triage_batch(records: list, cfg: TriageConfig) -> tuple:
    """Partition inference records into auto labels and a review queue.

    Rejected parses always go to review. The queue is sorted by ascending
    confidence (rejected items first); auto labels carry annotator="auto".
    """
    accepted = []
    queue = []
    for record in records:
        assessment = record.outcome.assessment
        if assessment is None or triage(assessment, cfg) == "Review":
            queue.append(ReviewItem(tile_id=record.tile_id, prediction=assessment))
        else:
            accepted.append(
                GroundTruthLabel(
                    tile_id=record.tile_id,
                    present=assessment.present,
                    location=assessment.location,
                    quantity=assessment.quantity,
                    annotator="auto",
                    annotated_at=_now(),
                )
            )
    queue.sort(key=lambda item: item.prediction.confidence if item.prediction else -1.0)
    return accepted, queue


# --- Distribution analytics --------------------------------------------------


def silverman_bandwidth(samples: np.ndarray) -> float:
    """Silverman's rule with a floor so degenerate samples stay well-posed
    on the 201-point grid."""
    n = len(samples)
    if n < 2:
        return 0.05
    std = samples.std(ddof=1)
    q75, q25 = np.percentile(samples, [75, 25])
    spread = min(std, (q75 - q25) / 1.34)
    bw = 0.9 * spread * n ** (-0.2)
    return max(bw, 0.02)


def kde_unit_interval(samples, grid_points: int = KDE_GRID_POINTS) -> tuple:
    """Gaussian KDE on [0,1] with boundary reflection, so the density
    integrates to 1 over the interval. Returns (grid pairs, bandwidth)."""
    s = np.asarray(list(samples), dtype=float)
    if s.size == 0:
        raise EmptyClass("cannot estimate a density from no samples")
    bw = silverman_bandwidth(s)
    x = np.linspace(0.0, 1.0, grid_points)
    data = np.concatenate([s, -s, 2.0 - s])  # reflect at both boundaries
    diffs = (x[:, None] - data[None, :]) / bw
    dens = np.exp(-0.5 * diffs**2).sum(axis=1) / (s.size * bw * np.sqrt(2 * np.pi))
    return list(zip(x.tolist(), dens.tolist())), float(bw)


def likelihood_summary(records: list, truths: list) -> DistributionSummary:
    """Medians of predicted likelihood per ground-truth class, plus a KDE of
    confidence over the true-positive and false-negative subsets."""
    truth_by_id = {t.tile_id: t for t in truths}
    like_true, like_false, conf_pool = [], [], []
    for record in records:
        a = record.outcome.assessment
        truth = truth_by_id.get(record.tile_id)
        if a is None or truth is None:
            continue
        if truth.present:
            like_true.append(a.likelihood)
            # TP and FN subsets drive the confidence density.
            conf_pool.append(a.confidence)
        else:
            like_false.append(a.likelihood)
    if not like_true or not like_false:
        raise EmptyClass("need at least one record per ground-truth class")
    grid, bw = kde_unit_interval(conf_pool if conf_pool else like_true + like_false)
    return DistributionSummary(
        median_likelihood_true=float(np.median(like_true)),
        median_likelihood_false=float(np.median(like_false)),
        kde_grid=grid,
        bandwidth=bw,
    )


# --- Review queue persistence ------------------------------------------------


class ReviewQueue:
    """File-backed pending queue plus ground-truth manifest appends.

    Corrections are serialized per process via a lock (compare-and-set on
    item status); the manifest is append-only through a single writer.
    """

    def __init__(self, queue_path, manifest_path):
        self.queue_path = Path(queue_path)
        self.manifest_path = Path(manifest_path)
        self._lock = threading.Lock()

    def load(self) -> list:
        if not self.queue_path.exists():
            return []
        items = []
        with open(self.queue_path) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    items.append(ReviewItem.from_json(json.loads(line)))
        return items

    def save(self, items: list):
        self.queue_path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self.queue_path.with_suffix(".tmp")
        with open(tmp, "w") as fh:
            for item in items:
                fh.write(json.dumps(item.to_json()) + "\n")
        tmp.replace(self.queue_path)

    def pending(self) -> list:
        items = [i for i in self.load() if i.status == "pending"]
        items.sort(key=lambda item: item.prediction.confidence if item.prediction else -1.0)
        return items

    def append_labels(self, labels: list):
        self.manifest_path.parent.mkdir(parents=True, exist_ok=True)
        with self._lock, open(self.manifest_path, "a") as fh:
            for label in labels:
                fh.write(json.dumps(label.to_json()) + "\n")

    def apply_correction(self, item_id: str, correction: GroundTruthLabel, reviewer: str) -> ReviewItem:
        """Resolve a pending item; appends the correction to the manifest.

        Status becomes "confirmed" when the correction matches the prediction's
        categorical projection, "corrected" otherwise.
        """
        with self._lock:
            items = self.load()
            target = next((i for i in items if i.tile_id == item_id), None)
            if target is None:
                raise NotFound(f"no review item for tile {item_id}")
            if target.status != "pending":
                raise AlreadyResolved(f"item {item_id} is already {target.status}")
            pred = target.prediction
            matches = (
                pred is not None
                and pred.present == correction.present
                and pred.location is correction.location
                and pred.quantity is correction.quantity
            )
            target.status = "confirmed" if matches else "corrected"
            target.correction = correction
            target.reviewer = reviewer
            target.updated_at = _now()
            self.save(items)
        self.append_labels([correction])
        return target
