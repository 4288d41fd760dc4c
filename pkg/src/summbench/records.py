"""Core domain types: evaluation records, metric results, run manifests.

These are plain dataclasses with explicit validation; everything that ends
up on disk goes through ``to_dict`` so serialization stays canonical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .errors import ValidationError

DIMENSIONS = ("coherence", "consistency", "fluency", "relevance")


@dataclass(frozen=True)
class EvaluationRecord:
    """One (source document, candidate summary) unit with its annotations."""

    record_id: str
    system_id: str
    source_text: str
    candidate_summary: str
    references: tuple[str, ...] = ()
    human_scores: Optional[dict[str, float]] = None

    def __post_init__(self):
        for name in ("record_id", "system_id", "source_text", "candidate_summary"):
            if not getattr(self, name):
                raise ValidationError(f"EvaluationRecord.{name} must be non-empty")
        object.__setattr__(self, "references", tuple(self.references))
        if self.human_scores is not None:
            for dim, value in self.human_scores.items():
                if dim not in DIMENSIONS:
                    raise ValidationError(
                        f"record {self.record_id!r}: unknown human-score dimension {dim!r}")
                if not (1.0 <= value <= 5.0):
                    raise ValidationError(
                        f"record {self.record_id!r}: human score {dim}={value} outside [1, 5]")

    @property
    def has_references(self) -> bool:
        return len(self.references) > 0


@dataclass
class MetricResult:
    """Per-summary scores keyed by dimension (or 'overall'), plus provenance."""

    metric_name: str
    record_id: str
    scores: dict[str, float]
    wall_time_seconds: float = 0.0
    provenance: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.scores:
            raise ValidationError(
                f"{self.metric_name}/{self.record_id}: scores must be non-empty")
        for key, value in self.scores.items():
            if not math.isfinite(value):
                raise ValidationError(
                    f"{self.metric_name}/{self.record_id}: score {key}={value} not finite")
        if self.wall_time_seconds < 0:
            raise ValidationError("wall_time_seconds must be >= 0")

    def to_dict(self, include_timing: bool = True) -> dict:
        # results.jsonl must be byte-identical across reruns, so the
        # volatile timing field is only included on request.
        out = {
            "metric_name": self.metric_name,
            "record_id": self.record_id,
            "scores": dict(self.scores),
            "provenance": dict(self.provenance),
        }
        if include_timing:
            out["wall_time_seconds"] = self.wall_time_seconds
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "MetricResult":
        return cls(
            metric_name=data["metric_name"],
            record_id=data["record_id"],
            scores={k: float(v) for k, v in data["scores"].items()},
            wall_time_seconds=float(data.get("wall_time_seconds", 0.0)),
            provenance={k: str(v) for k, v in data.get("provenance", {}).items()},
        )


@dataclass
class RunManifest:
    """Frozen configuration of one evaluation run.

    Every parameter that can influence a score lives here: metric
    parameters (including prompt-template hashes), backend identities and
    sampling parameters, the seed, and environment versions.
    """

    run_id: str
    dataset_id: str
    metric_configs: list[dict] = field(default_factory=list)
    backend_configs: list[dict] = field(default_factory=list)
    seed: Optional[int] = None
    started_at: Optional[str] = None
    finished_at: Optional[str] = None
    environment: dict[str, str] = field(default_factory=dict)

    def metric_names(self) -> set[str]:
        return {cfg["metric_name"] for cfg in self.metric_configs}

    def backend_ids(self) -> set[str]:
        return {cfg["backend_id"] for cfg in self.backend_configs}

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "dataset_id": self.dataset_id,
            "metric_configs": self.metric_configs,
            "backend_configs": self.backend_configs,
            "seed": self.seed,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "environment": dict(self.environment),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunManifest":
        return cls(
            run_id=data["run_id"],
            dataset_id=data["dataset_id"],
            metric_configs=list(data.get("metric_configs", [])),
            backend_configs=list(data.get("backend_configs", [])),
            seed=data.get("seed"),
            started_at=data.get("started_at"),
            finished_at=data.get("finished_at"),
            environment=dict(data.get("environment", {})),
        )


@dataclass(frozen=True)
class MetricDescriptor:
    """Static description of a metric's input needs and outputs."""

    name: str
    requires_references: bool
    requires_source: bool
    dimensions_produced: frozenset[str]
    backend_requirements: frozenset[str] = frozenset({"none"})
    thread_safe: bool = True

    def __post_init__(self):
        allowed = {"none", "model", "chat"}
        extra = set(self.backend_requirements) - allowed
        if extra:
            raise ValidationError(f"unknown backend requirements: {sorted(extra)}")


SAMPLING_PARAM_KEYS = ("temperature", "top_k", "top_p")


def audit_manifest(manifest: RunManifest, results: list[MetricResult]) -> list[str]:
    """Check that the manifest fully accounts for every result.

    Returns a list of problems (empty means the audit passes): metrics or
    backend identities referenced by results but absent from the manifest,
    chat-backend sampling parameters left implicit, prompt hashes used by a
    result but not frozen into its metric config, and a missing seed when
    any result declares one was used.
    """
    problems: list[str] = []
    declared_metrics = manifest.metric_names()
    declared_backends = manifest.backend_ids()

    for cfg in manifest.backend_configs:
        if cfg.get("kind") == "chat":
            sampling = cfg.get("sampling", {})
            for key in SAMPLING_PARAM_KEYS:
                if key not in sampling:
                    problems.append(
                        f"backend {cfg.get('backend_id')!r}: sampling parameter "
                        f"{key!r} not explicit in manifest")

    prompt_hashes_by_metric: dict[str, set[str]] = {}
    for cfg in manifest.metric_configs:
        hashes = [v for k, v in cfg.get("params", {}).items()
                  if k.endswith("prompt_hash") or k == "prompt_hashes"]
        flat: set[str] = set()
        for h in hashes:
            if isinstance(h, dict):
                flat.update(h.values())
            else:
                flat.add(h)
        prompt_hashes_by_metric[cfg["metric_name"]] = flat

    for result in results:
        if result.metric_name not in declared_metrics:
            problems.append(f"metric {result.metric_name!r} missing from metric_configs")
        backend_id = result.provenance.get("backend_id")
        if backend_id and backend_id not in declared_backends:
            problems.append(
                f"backend {backend_id!r} (result {result.record_id}) "
                f"missing from backend_configs")
        for key, value in result.provenance.items():
            if key.endswith("prompt_hash"):
                known = prompt_hashes_by_metric.get(result.metric_name, set())
                if value not in known:
                    problems.append(
                        f"{result.metric_name}: prompt hash {value[:12]}… used by "
                        f"record {result.record_id} not frozen in manifest")
        if result.provenance.get("seed") is not None and manifest.seed is None:
            problems.append(
                f"{result.metric_name}/{result.record_id} used a seed but "
                f"manifest.seed is absent")
    # deduplicate while keeping first-seen order
    seen: set[str] = set()
    unique = [p for p in problems if not (p in seen or seen.add(p))]
    return unique
