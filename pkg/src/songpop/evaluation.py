"""Regression/threshold metrics and the analysis tables built from predictions."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dataset import MODEL_FEATURES, TrackRecord
from .errors import InvalidInputError

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 70.0


def _pair(preds, targets):
    p = np.asarray(preds, dtype=np.float64).ravel()
    t = np.asarray(targets, dtype=np.float64).ravel()
    if p.size == 0 or p.size != t.size:
        raise InvalidInputError(f"need equal non-empty lengths, got {p.size} and {t.size}")
    return p, t


def mae(preds, targets) -> float:
    p, t = _pair(preds, targets)
    return float(np.mean(np.abs(p - t)))


def _ratio(num, den):
    return num / den if den > 0 else None


def f1_score(precision: Optional[float], recall: Optional[float]) -> Optional[float]:
    if precision is None or recall is None or precision + recall <= 0:
        return None
    return 2.0 * precision * recall / (precision + recall)


@dataclass
class ThresholdMetrics:
    threshold: float
    tp: int
    fp: int
    tn: int
    fn: int
    precision: Optional[float]
    recall: Optional[float]
    f1: Optional[float]
    accuracy: float

    @classmethod
    def from_confusion(cls, tp, fp, tn, fn, threshold=DEFAULT_THRESHOLD) -> "ThresholdMetrics":
        total = tp + fp + tn + fn
        if total == 0:
            raise InvalidInputError("empty confusion matrix")
        p = _ratio(tp, tp + fp)
        r = _ratio(tp, tp + fn)
        return cls(threshold, tp, fp, tn, fn, p, r, f1_score(p, r), (tp + tn) / total)

    @property
    def positives(self) -> int:
        return self.tp + self.fn

    @property
    def negatives(self) -> int:
        return self.tn + self.fp


def threshold_metrics(preds, targets, threshold: float = DEFAULT_THRESHOLD) -> ThresholdMetrics:
    """Binarize both sides at ``threshold`` (popular = score >= threshold).

    Metrics with a zero denominator come back as ``None`` rather than 0.
    """
    if not 0 < threshold < 100:
        raise InvalidInputError(f"threshold must lie in (0, 100), got {threshold}")
    p, t = _pair(preds, targets)
    pred_pos = p >= threshold
    true_pos = t >= threshold
    tp = int(np.sum(pred_pos & true_pos))
    fp = int(np.sum(pred_pos & ~true_pos))
    tn = int(np.sum(~pred_pos & ~true_pos))
    fn = int(np.sum(~pred_pos & true_pos))
    return ThresholdMetrics.from_confusion(tp, fp, tn, fn, threshold)


def pearson(xs, ys) -> float:
    """Sample Pearson correlation coefficient."""
    x = np.asarray(xs, dtype=np.float64).ravel()
    y = np.asarray(ys, dtype=np.float64).ravel()
    if x.size != y.size or x.size < 2:
        raise InvalidInputError(f"need equal lengths >= 2, got {x.size} and {y.size}")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise InvalidInputError("correlation is undefined for a constant input")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


@dataclass
class CorrelationTable:
    rows: list  # (feature, r), ascending by r
    warnings: list = field(default_factory=list)


def correlation_report(records: Sequence[TrackRecord], names: Sequence[str] = MODEL_FEATURES) -> CorrelationTable:
    if len(records) < 2:
        raise InvalidInputError("need at least two records to correlate")
    pop = np.array([r.popularity for r in records])
    rows, warnings = [], []
    for name in names:
        xs = np.array([float(getattr(r, name)) for r in records])
        try:
            rows.append((name, pearson(xs, pop)))
        except InvalidInputError:
            msg = f"{name}: constant across records, correlation skipped"
            log.warning(msg)
            warnings.append(msg)
    rows.sort(key=lambda kv: kv[1])
    return CorrelationTable(rows, warnings)


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    mean_error: float


def error_histogram(preds, targets, bin_count: int = 20) -> Histogram:
    """Histogram of signed errors (pred - actual); equal-width bins over the
    observed range, last bin closed on the right."""
    if bin_count < 1:
        raise InvalidInputError(f"bin_count must be >= 1, got {bin_count}")
    p, t = _pair(preds, targets)
    errors = p - t
    counts, edges = np.histogram(errors, bins=bin_count)
    return Histogram(edges, counts, float(errors.mean()))


@dataclass
class HeatmapGrid:
    years: list
    means: dict  # (year, month) -> mean popularity, present cells only
    counts: dict  # (year, month) -> track count

    def cell(self, year: int, month: int) -> Optional[float]:
        """Mean popularity, or None when no track was released that month."""
        return self.means.get((year, month))

    def as_matrix(self) -> np.ndarray:
        """Years x 12 months, NaN where absent."""
        m = np.full((len(self.years), 12), np.nan)
        for i, y in enumerate(self.years):
            for month in range(1, 13):
                if (y, month) in self.means:
                    m[i, month - 1] = self.means[(y, month)]
        return m


def monthly_popularity_heatmap(records: Sequence[TrackRecord]) -> HeatmapGrid:
    sums: dict = {}
    counts: dict = {}
    for r in records:
        key = (int(r.release_year), int(r.release_month))
        sums[key] = sums.get(key, 0.0) + r.popularity
        counts[key] = counts.get(key, 0) + 1
    means = {k: sums[k] / counts[k] for k in sorted(sums)}
    years = sorted({y for y, _ in means})
    return HeatmapGrid(years, means, {k: counts[k] for k in means})


@dataclass
class ComparisonRow:
    track_id: str
    actual: float
    predicted: float
    error: float


def prediction_comparison(records: Sequence[TrackRecord], preds) -> list:
    """Per-track rows sorted by actual popularity, highest first; ``predicted``
    is the raw model output."""
    preds = np.asarray(preds, dtype=np.float64).ravel()
    if len(records) != preds.size:
        raise InvalidInputError(f"{len(records)} records but {preds.size} predictions")
    rows = [ComparisonRow(r.track_id, float(r.popularity), float(p), abs(float(p) - r.popularity))
            for r, p in zip(records, preds)]
    rows.sort(key=lambda row: (-row.actual, row.track_id))
    return rows


@dataclass
class EvaluationReport:
    mae: float
    pearson: Optional[float]
    metrics: ThresholdMetrics
    rows: list
    histogram: Histogram

    def summary(self) -> dict:
        m = self.metrics
        return {
            "n_tracks": len(self.rows),
            "mae": self.mae,
            "pearson": self.pearson,
            "threshold": m.threshold,
            "confusion": {"tp": m.tp, "fp": m.fp, "tn": m.tn, "fn": m.fn},
            "precision": m.precision,
            "recall": m.recall,
            "f1": m.f1,
            "accuracy": m.accuracy,
            "class_balance": {"popular": m.positives, "not_popular": m.negatives},
            "mean_error": self.histogram.mean_error,
        }


def evaluate_predictions(records: Sequence[TrackRecord], preds, threshold: float = DEFAULT_THRESHOLD,
                         bin_count: int = 20) -> EvaluationReport:
    targets = np.array([r.popularity for r in records])
    preds = np.asarray(preds, dtype=np.float64)
    try:
        r = pearson(preds, targets)
    except InvalidInputError:
        r = None
    return EvaluationReport(
        mae=mae(preds, targets),
        pearson=r,
        metrics=threshold_metrics(preds, targets, threshold),
        rows=prediction_comparison(records, preds),
        histogram=error_histogram(preds, targets, bin_count),
    )


def _writer(path):
    fh = open(path, "w", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def write_comparison_csv(path, rows) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(("track_id", "actual", "predicted", "predicted_clamped", "abs_error"))
        for row in rows:
            clamped = min(100.0, max(0.0, row.predicted))
            w.writerow((row.track_id, repr(row.actual), repr(row.predicted), repr(clamped), repr(row.error)))


def write_histogram_csv(path, hist: Histogram) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(("bin_left", "bin_right", "count"))
        for lo, hi, c in zip(hist.edges[:-1], hist.edges[1:], hist.counts):
            w.writerow((repr(float(lo)), repr(float(hi)), int(c)))


def write_correlation_csv(path, table: CorrelationTable) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(("feature", "pearson_r"))
        for name, r in table.rows:
            w.writerow((name, repr(r)))


def write_heatmap_csv(path, grid: HeatmapGrid) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(("year", "month", "mean", "count"))
        for (y, m), mean in grid.means.items():
            w.writerow((y, m, repr(mean), grid.counts[(y, m)]))


def write_summary_json(path, summary: dict) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
