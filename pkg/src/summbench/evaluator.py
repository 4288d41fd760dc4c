"""Evaluation orchestrator: runs metrics over records, times them, caches
results, and writes self-describing run directories.

A run directory contains ``manifest.json``, ``results.jsonl`` (stable
fields only, so reruns are byte-identical), ``timings.jsonl`` (the
volatile wall-clock measurements), and ``errors.jsonl``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import platform
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from .backends import BackendSuite
from .canonical import json_line
from .errors import SummbenchError
from .records import EvaluationRecord, MetricResult, RunManifest
from .registry import TextMetric, create_metric, get_descriptor

log = logging.getLogger(__name__)


@dataclass
class ErrorEntry:
    record_id: str
    metric_name: str
    error: str

    def to_dict(self) -> dict:
        return {"record_id": self.record_id, "metric_name": self.metric_name,
                "error": self.error}


@dataclass
class EvaluationOutcome:
    results: list[MetricResult]
    errors: list[ErrorEntry]

    @property
    def complete(self) -> bool:
        return not self.errors


class ResultCache:
    """Keyed store of (scores, provenance), optionally file-backed.

    The key covers metric name, metric parameters (prompt hashes included),
    backend identity, and record content, so a stale hit is impossible.
    """

    def __init__(self, path: Optional[Path] = None):
        self.path = Path(path) if path else None
        self._store: dict[str, dict] = {}
        self._lock = threading.Lock()
        if self.path and self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    entry = json.loads(line)
                    self._store[entry["key"]] = entry

    @staticmethod
    def key(metric: TextMetric, backend_identity: str, record: EvaluationRecord) -> str:
        payload = json.dumps({
            "metric": metric.name,
            "params": metric.manifest_params(),
            "backend": backend_identity,
            "record": {
                "source": record.source_text,
                "candidate": record.candidate_summary,
                "references": list(record.references),
            },
        }, sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def get(self, key: str) -> Optional[dict]:
        with self._lock:
            return self._store.get(key)

    def put(self, key: str, scores: dict, provenance: dict) -> None:
        entry = {"key": key, "scores": dict(scores), "provenance": dict(provenance)}
        with self._lock:
            self._store[key] = entry
            if self.path:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(entry, sort_keys=True, ensure_ascii=False) + "\n")


def _backend_identity(metric: TextMetric, backends: BackendSuite) -> str:
    needs = metric.descriptor.backend_requirements
    parts = []
    if "model" in needs and backends.model is not None:
        parts.append(backends.model.identity)
    if "chat" in needs and backends.chat is not None:
        parts.append(backends.chat.identity)
    return "|".join(parts) or "none"


class Evaluator:
    """Applies registered metrics to records and aggregates the outcome."""

    def __init__(self, metric_params: Optional[dict[str, dict]] = None,
                 backends: Optional[BackendSuite] = None, workers: int = 1,
                 cache: Optional[ResultCache] = None):
        self.metric_params = dict(metric_params or {})
        self.backends = backends or BackendSuite()
        self.workers = max(1, workers)
        self.cache = cache

    def build_metrics(self, metric_names: list[str]) -> dict[str, TextMetric]:
        return {name: create_metric(name, self.metric_params.get(name, {}), self.backends)
                for name in metric_names}

    def evaluate(self, records: list[EvaluationRecord], metric_names: list[str],
                 manifest: RunManifest) -> EvaluationOutcome:
        """Score every (record, metric) pair in deterministic order.

        Per-pair failures become error entries; the run continues. Exactly
        one result or error exists per pair.
        """
        metrics = self.build_metrics(metric_names)
        for name, metric in metrics.items():
            if name not in manifest.metric_names():
                manifest.metric_configs.append(
                    {"metric_name": name, "params": metric.manifest_params()})
        locks = {name: threading.Lock()
                 for name, m in metrics.items() if not m.descriptor.thread_safe}

        pairs = [(record, name) for record in records for name in metric_names]

        def run_pair(pair):
            record, name = pair
            metric = metrics[name]
            lock = locks.get(name)
            try:
                self._check_requirements(metric, record)
                key = None
                if self.cache is not None:
                    key = ResultCache.key(metric, _backend_identity(metric, self.backends),
                                          record)
                    cached = self.cache.get(key)
                    if cached is not None:
                        provenance = dict(cached["provenance"])
                        provenance["cache"] = "hit"
                        return MetricResult(metric_name=name, record_id=record.record_id,
                                            scores=dict(cached["scores"]),
                                            wall_time_seconds=0.0, provenance=provenance)
                start = time.perf_counter()
                if lock:
                    with lock:
                        scores, provenance = metric.compute(record)
                else:
                    scores, provenance = metric.compute(record)
                elapsed = time.perf_counter() - start
                if self.cache is not None and key is not None:
                    self.cache.put(key, scores, provenance)
                return MetricResult(metric_name=name, record_id=record.record_id,
                                    scores=scores, wall_time_seconds=elapsed,
                                    provenance=provenance)
            except SummbenchError as exc:
                log.warning("%s on record %s failed: %s", name, record.record_id, exc)
                return ErrorEntry(record_id=record.record_id, metric_name=name,
                                  error=str(exc))

        if self.workers == 1:
            outputs = [run_pair(pair) for pair in pairs]
        else:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                outputs = list(pool.map(run_pair, pairs))

        results = [o for o in outputs if isinstance(o, MetricResult)]
        errors = [o for o in outputs if isinstance(o, ErrorEntry)]
        assert len(results) + len(errors) == len(records) * len(metric_names)
        return EvaluationOutcome(results=results, errors=errors)

    @staticmethod
    def _check_requirements(metric: TextMetric, record: EvaluationRecord) -> None:
        from .errors import PreconditionError
        if metric.descriptor.requires_references and not record.has_references:
            raise PreconditionError(
                f"record {record.record_id!r} lacks references required by "
                f"metric {metric.name!r}")


def time_metric(results: list[MetricResult]) -> dict[str, float]:
    """Total wall-clock seconds per metric."""
    if not results:
        raise SummbenchError("time_metric requires at least one result")
    totals: dict[str, float] = {}
    for result in results:
        totals[result.metric_name] = (totals.get(result.metric_name, 0.0)
                                      + result.wall_time_seconds)
    return totals


def new_manifest(dataset_id: str, backends: BackendSuite,
                 seed: Optional[int] = None, run_id: Optional[str] = None) -> RunManifest:
    import numpy
    import scipy
    environment = {
        "python": platform.python_version(),
        "platform": platform.platform(),
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "summbench": _package_version(),
    }
    return RunManifest(
        run_id=run_id or uuid.uuid4().hex[:12],
        dataset_id=dataset_id,
        backend_configs=backends.manifest_entries(),
        seed=seed,
        started_at=datetime.now(timezone.utc).isoformat(),
        environment=environment,
    )


def _package_version() -> str:
    try:
        from importlib.metadata import version
        return version("summbench")
    except Exception:
        return "unknown"


def write_run_dir(out_dir: Path, manifest: RunManifest,
                  outcome: EvaluationOutcome) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest.finished_at = datetime.now(timezone.utc).isoformat()
    (out_dir / "manifest.json").write_text(json_line(manifest.to_dict()),
                                           encoding="utf-8")
    with open(out_dir / "results.jsonl", "w", encoding="utf-8") as fh:
        for result in outcome.results:
            fh.write(json_line(result.to_dict(include_timing=False)))
    with open(out_dir / "timings.jsonl", "w", encoding="utf-8") as fh:
        for result in outcome.results:
            fh.write(json_line({"metric_name": result.metric_name,
                                "record_id": result.record_id,
                                "wall_time_seconds": result.wall_time_seconds}))
    with open(out_dir / "errors.jsonl", "w", encoding="utf-8") as fh:
        for error in outcome.errors:
            fh.write(json_line(error.to_dict()))


def load_run_dir(run_dir: Path) -> tuple[RunManifest, list[MetricResult], list[dict]]:
    run_dir = Path(run_dir)
    manifest_path = run_dir / "manifest.json"
    results_path = run_dir / "results.jsonl"
    if not manifest_path.exists() or not results_path.exists():
        raise SummbenchError(f"incomplete run directory {run_dir}: "
                             f"manifest.json and results.jsonl are required")
    manifest = RunManifest.from_dict(json.loads(manifest_path.read_text(encoding="utf-8")))
    timings: dict[tuple[str, str], float] = {}
    timings_path = run_dir / "timings.jsonl"
    if timings_path.exists():
        with open(timings_path, encoding="utf-8") as fh:
            for line in fh:
                entry = json.loads(line)
                timings[(entry["metric_name"], entry["record_id"])] = \
                    entry["wall_time_seconds"]
    results = []
    with open(results_path, encoding="utf-8") as fh:
        for line in fh:
            data = json.loads(line)
            data["wall_time_seconds"] = timings.get(
                (data["metric_name"], data["record_id"]), 0.0)
            results.append(MetricResult.from_dict(data))
    errors = []
    errors_path = run_dir / "errors.jsonl"
    if errors_path.exists():
        with open(errors_path, encoding="utf-8") as fh:
            errors = [json.loads(line) for line in fh if line.strip()]
    return manifest, results, errors
