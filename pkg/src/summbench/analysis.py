"""Rank correlations against human judgments, deltas vs stored reference
values, and multi-run stability statistics.

Coefficient math is delegated to scipy (average-rank Spearman, tie-corrected
Kendall tau-b, product-moment Pearson); this module owns the error contract,
the summary/system-level join, and the reference-delta bookkeeping.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import stats

from .errors import ConstantInputError, PreconditionError
from .records import DIMENSIONS, EvaluationRecord, MetricResult

log = logging.getLogger(__name__)

GRANULARITIES = ("summary_level", "system_level")
COEFFICIENTS = ("spearman", "kendall", "pearson")


def _check_series(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise PreconditionError(f"length mismatch: {x.shape} vs {y.shape}")
    if len(x) < 3:
        raise PreconditionError(f"need at least 3 points, got {len(x)}")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise ConstantInputError("correlation undefined on a constant series")
    return x, y


def spearman(x, y) -> float:
    """Pearson correlation of average-assigned ranks."""
    x, y = _check_series(x, y)
    return float(stats.spearmanr(x, y).statistic)


def kendall(x, y) -> float:
    """Tie-corrected Kendall tau-b."""
    x, y = _check_series(x, y)
    return float(stats.kendalltau(x, y, variant="b").statistic)


def pearson(x, y) -> float:
    """Product-moment correlation."""
    x, y = _check_series(x, y)
    return float(stats.pearsonr(x, y).statistic)


_COEFF_FUNCS = {"spearman": spearman, "kendall": kendall, "pearson": pearson}


@dataclass(frozen=True)
class CorrelationEntry:
    metric_name: str       # includes the score key when it is not dimension-aligned
    dimension: str
    granularity: str
    coefficient: str
    value: float
    n: int
    delta_vs_reference: Optional[float] = None

    def to_dict(self) -> dict:
        return {"metric_name": self.metric_name, "dimension": self.dimension,
                "granularity": self.granularity, "coefficient": self.coefficient,
                "value": self.value, "n": self.n,
                "delta_vs_reference": self.delta_vs_reference}


@dataclass
class CorrelationReport:
    entries: list[CorrelationEntry] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)
    n_excluded_records: int = 0

    def to_dict(self) -> dict:
        return {"entries": [e.to_dict() for e in self.entries],
                "errors": list(self.errors),
                "n_excluded_records": self.n_excluded_records}

    @classmethod
    def from_dict(cls, data: dict) -> "CorrelationReport":
        return cls(entries=[CorrelationEntry(**e) for e in data.get("entries", [])],
                   errors=list(data.get("errors", [])),
                   n_excluded_records=data.get("n_excluded_records", 0))


class ReferenceTable:
    """Expected coefficients from prior literature, keyed by
    (metric, dimension, model identifier or blank)."""

    def __init__(self, rows: list[dict]):
        self._by_key: dict[tuple[str, str, str], float] = {}
        self.rows = rows
        for row in rows:
            value = float(row["expected"])
            if not -1.0 <= value <= 1.0:
                raise PreconditionError(
                    f"reference value {value} outside [-1, 1]: {row}")
            key = (row["metric"], row["dimension"], row.get("model", "") or "")
            self._by_key[key] = value

    @classmethod
    def from_csv(cls, path: Optional[Path] = None) -> "ReferenceTable":
        if path is None:
            text = resources.files("summbench.assets").joinpath(
                "reference_values.csv").read_text(encoding="utf-8")
            reader = csv.DictReader(text.splitlines())
            return cls(list(reader))
        with open(path, encoding="utf-8", newline="") as fh:
            return cls(list(csv.DictReader(fh)))

    def lookup(self, metric_label: str, dimension: str,
               model: Optional[str] = None) -> Optional[float]:
        base = metric_label.split(".", 1)[0]
        for metric in (metric_label, base):
            for m in ((model or ""), ""):
                value = self._by_key.get((metric, dimension, m))
                if value is not None:
                    return value
        return None


def _entry_label(metric_name: str, score_key: str) -> str:
    if score_key in ("overall",) or score_key in DIMENSIONS:
        return metric_name
    return f"{metric_name}.{score_key}"


def correlate(results: list[MetricResult], records: list[EvaluationRecord],
              granularity: str = "summary_level", coefficient: str = "spearman",
              reference: Optional[ReferenceTable] = None) -> CorrelationReport:
    """Correlate every (metric score key, human dimension) series.

    Score keys that are themselves dimension names pair only with that
    dimension; 'overall'-style keys pair with all four. ``system_level``
    averages metric and human scores per system before correlating.
    """
    if granularity not in GRANULARITIES:
        raise PreconditionError(f"unknown granularity {granularity!r}")
    if coefficient not in COEFFICIENTS:
        raise PreconditionError(f"unknown coefficient {coefficient!r}")

    by_id = {r.record_id: r for r in records}
    report = CorrelationReport()
    series: dict[tuple[str, str, str], list[tuple[str, float, float]]] = {}
    excluded: set[str] = set()
    models: dict[str, str] = {}

    for result in results:
        record = by_id.get(result.record_id)
        if record is None or not record.human_scores:
            excluded.add(result.record_id)
            continue
        if "model" in result.provenance:
            models[result.metric_name] = result.provenance["model"]
        for score_key, value in result.scores.items():
            dims = ((score_key,) if score_key in DIMENSIONS else DIMENSIONS)
            for dim in dims:
                if dim not in record.human_scores:
                    continue
                key = (result.metric_name, score_key, dim)
                series.setdefault(key, []).append(
                    (record.system_id, value, record.human_scores[dim]))

    report.n_excluded_records = len(excluded)
    if excluded:
        log.warning("correlate: %d records excluded (unjoinable or unannotated)",
                    len(excluded))

    func = _COEFF_FUNCS[coefficient]
    for (metric_name, score_key, dim), points in sorted(series.items()):
        label = _entry_label(metric_name, score_key)
        if granularity == "system_level":
            by_system: dict[str, list[tuple[float, float]]] = {}
            for system_id, m, h in points:
                by_system.setdefault(system_id, []).append((m, h))
            xs = [float(np.mean([p[0] for p in pts])) for pts in by_system.values()]
            ys = [float(np.mean([p[1] for p in pts])) for pts in by_system.values()]
        else:
            xs = [p[1] for p in points]
            ys = [p[2] for p in points]
        try:
            value = func(xs, ys)
        except (PreconditionError, ConstantInputError) as exc:
            report.errors.append(f"{label}/{dim} [{granularity}]: {exc}")
            continue
        delta = None
        if reference is not None:
            expected = reference.lookup(label, dim, models.get(metric_name))
            if expected is not None:
                delta = value - expected
        report.entries.append(CorrelationEntry(
            metric_name=label, dimension=dim, granularity=granularity,
            coefficient=coefficient, value=value, n=len(xs),
            delta_vs_reference=delta))
    return report


@dataclass(frozen=True)
class StabilityEntry:
    metric_name: str
    dimension: str
    mean: float
    std: float
    min: float
    max: float
    run_count: int

    def to_dict(self) -> dict:
        return {"metric_name": self.metric_name, "dimension": self.dimension,
                "mean": self.mean, "std": self.std, "min": self.min,
                "max": self.max, "run_count": self.run_count}


@dataclass
class StabilityReport:
    entries: list[StabilityEntry] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"entries": [e.to_dict() for e in self.entries]}

    @classmethod
    def from_dict(cls, data: dict) -> "StabilityReport":
        return cls(entries=[StabilityEntry(**e) for e in data.get("entries", [])])


def stability(reports: list[CorrelationReport]) -> StabilityReport:
    """Per-(metric, dimension) mean/std/min/max of coefficients across runs.

    Std is the population standard deviation, so identical runs give
    exactly 0. All runs must cover the same keys.
    """
    if len(reports) < 2:
        raise PreconditionError("stability needs at least 2 runs")
    key_sets = [{(e.metric_name, e.dimension, e.granularity, e.coefficient)
                 for e in report.entries} for report in reports]
    common = key_sets[0]
    union = set().union(*key_sets)
    inter = common.intersection(*key_sets[1:])
    if union != inter:
        diff = sorted(union - inter)
        raise PreconditionError(f"runs cover different keys; mismatched: {diff}")

    values: dict[tuple, list[float]] = {}
    for report in reports:
        for entry in report.entries:
            key = (entry.metric_name, entry.dimension, entry.granularity,
                   entry.coefficient)
            values.setdefault(key, []).append(entry.value)
    entries = []
    for (metric_name, dim, _gran, _coeff), vals in sorted(values.items()):
        mean = sum(vals) / len(vals)
        var = sum((v - mean) ** 2 for v in vals) / len(vals)
        entries.append(StabilityEntry(
            metric_name=metric_name, dimension=dim, mean=mean,
            std=math.sqrt(var), min=min(vals), max=max(vals),
            run_count=len(vals)))
    return StabilityReport(entries=entries)
