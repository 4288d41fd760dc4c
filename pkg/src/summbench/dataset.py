"""Dataset ingestion: normalized JSON-lines records and annotation averaging.

The canonical on-disk format is owned by this package (one JSON object per
summary, see :data:`SCHEMA_FIELDS`); ``convert_summeval`` maps the upstream
release, which splits source articles from annotations, into it.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

from .errors import DatasetError, PreconditionError, ValidationError
from .records import DIMENSIONS, EvaluationRecord

log = logging.getLogger(__name__)

SCHEMA_FIELDS = ("record_id", "system_id", "source_text", "candidate_summary",
                 "references", "annotations")
POLICIES = ("expert_mean", "crowd_mean", "all_mean")


@dataclass(frozen=True)
class RawAnnotation:
    """One annotator's four 1-5 integer judgments."""

    annotator_class: str  # "expert" or "crowd"
    scores: dict[str, int]

    def __post_init__(self):
        if self.annotator_class not in ("expert", "crowd"):
            raise ValidationError(f"unknown annotator class {self.annotator_class!r}")
        missing = set(DIMENSIONS) - set(self.scores)
        if missing:
            raise ValidationError(f"annotation missing dimensions: {sorted(missing)}")
        for dim, value in self.scores.items():
            if not isinstance(value, int) or not (1 <= value <= 5):
                raise ValidationError(
                    f"annotation score {dim}={value!r} must be an integer in [1, 5]")


@dataclass(frozen=True)
class DatasetSummary:
    n_documents: int
    n_systems: int
    n_summaries: int
    n_references_min: int
    n_references_max: int


def aggregate_annotations(annotations: list[RawAnnotation],
                          policy: str = "expert_mean") -> dict[str, float]:
    """Per-dimension arithmetic mean of the annotations the policy selects."""
    if policy not in POLICIES:
        raise PreconditionError(f"unknown aggregation policy {policy!r}")
    wanted = {"expert_mean": ("expert",), "crowd_mean": ("crowd",),
              "all_mean": ("expert", "crowd")}[policy]
    selected = [a for a in annotations if a.annotator_class in wanted]
    if not selected:
        raise PreconditionError(f"no annotations match policy {policy!r}")
    return {dim: sum(a.scores[dim] for a in selected) / len(selected)
            for dim in DIMENSIONS}


def _parse_annotation(obj: dict) -> RawAnnotation:
    return RawAnnotation(annotator_class=obj["annotator_class"],
                         scores={dim: obj[dim] for dim in DIMENSIONS})


@dataclass
class IngestionOptions:
    aggregation_policy: str = "expert_mean"
    # records without annotations stay usable for metric computation; the
    # correlation join excludes them with a logged count
    keep_unannotated: bool = True


def load_dataset(path: Path, options: Optional[IngestionOptions] = None
                 ) -> tuple[list[EvaluationRecord], DatasetSummary]:
    """Load normalized JSON-lines records; malformed lines are fatal with
    their line number, invalid records are rejected with a reason."""
    options = options or IngestionOptions()
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"dataset file not found: {path}")
    records: list[EvaluationRecord] = []
    rejected = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
            try:
                records.append(_record_from_obj(obj, options))
            except (ValidationError, PreconditionError, KeyError) as exc:
                rejected += 1
                log.warning("%s:%d: record rejected: %s", path, lineno, exc)
    if rejected:
        log.warning("%s: %d records rejected during ingestion", path, rejected)
    if not records:
        raise DatasetError(f"{path}: no valid records")
    return records, summarize(records)


def _record_from_obj(obj: dict, options: IngestionOptions) -> EvaluationRecord:
    annotations = [_parse_annotation(a) for a in obj.get("annotations", [])]
    human_scores = None
    if annotations:
        try:
            human_scores = aggregate_annotations(annotations, options.aggregation_policy)
        except PreconditionError:
            # e.g. expert policy but only crowd annotations present
            human_scores = None
    if human_scores is None and not options.keep_unannotated:
        raise ValidationError("record has no annotations matching the policy")
    return EvaluationRecord(
        record_id=obj["record_id"],
        system_id=obj["system_id"],
        source_text=obj["source_text"],
        candidate_summary=obj["candidate_summary"],
        references=tuple(obj.get("references", [])),
        human_scores=human_scores,
    )


def summarize(records: list[EvaluationRecord]) -> DatasetSummary:
    documents = {r.source_text for r in records}
    systems = {r.system_id for r in records}
    ref_counts = [len(r.references) for r in records]
    return DatasetSummary(
        n_documents=len(documents),
        n_systems=len(systems),
        n_summaries=len(records),
        n_references_min=min(ref_counts) if ref_counts else 0,
        n_references_max=max(ref_counts) if ref_counts else 0,
    )


def _summeval_annotations(raw: dict, key: str, annotator_class: str
                          ) -> Iterable[RawAnnotation]:
    for ann in raw.get(key, []):
        try:
            yield RawAnnotation(
                annotator_class=annotator_class,
                scores={dim: int(ann[dim]) for dim in DIMENSIONS})
        except (KeyError, TypeError, ValueError, ValidationError) as exc:
            log.warning("skipping malformed %s annotation: %s", annotator_class, exc)


def convert_summeval(annotations_path: Path, articles_dir: Optional[Path],
                     out_path: Path) -> int:
    """Convert the upstream paired-annotation release to the normalized schema.

    ``articles_dir`` holds the source articles as ``<id>.story``/``<id>.txt``
    files; when the annotation line already embeds a ``text`` field the
    directory is optional. Returns the number of records written.
    """
    annotations_path = Path(annotations_path)
    if not annotations_path.exists():
        raise DatasetError(f"annotations file not found: {annotations_path}")
    written = 0
    with open(annotations_path, encoding="utf-8") as fh, \
            open(out_path, "w", encoding="utf-8") as out:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(
                    f"{annotations_path}:{lineno}: malformed JSON: {exc}") from exc
            doc_id = str(raw.get("id", f"line{lineno}"))
            system_id = str(raw.get("model_id", "unknown"))
            source = raw.get("text") or _read_article(articles_dir, doc_id,
                                                      raw.get("filepath"))
            if not source:
                log.warning("%s:%d: no source article for %s; skipped",
                            annotations_path, lineno, doc_id)
                continue
            annotations = []
            annotations += [
                {"annotator_class": "expert", **a.scores}
                for a in _summeval_annotations(raw, "expert_annotations", "expert")]
            annotations += [
                {"annotator_class": "crowd", **a.scores}
                for a in _summeval_annotations(raw, "turker_annotations", "crowd")]
            record = {
                "record_id": f"{doc_id}::{system_id}",
                "system_id": system_id,
                "source_text": source,
                "candidate_summary": raw.get("decoded", ""),
                "references": raw.get("references", []),
                "annotations": annotations,
            }
            out.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")
            written += 1
    if not written:
        raise DatasetError(f"{annotations_path}: conversion produced no records")
    return written


def _read_article(articles_dir: Optional[Path], doc_id: str,
                  filepath: Optional[str]) -> Optional[str]:
    if articles_dir is None:
        return None
    articles_dir = Path(articles_dir)
    candidates = [articles_dir / f"{doc_id}.story", articles_dir / f"{doc_id}.txt",
                  articles_dir / doc_id]
    if filepath:
        candidates.append(articles_dir / Path(filepath).name)
    for candidate in candidates:
        if candidate.exists():
            return candidate.read_text(encoding="utf-8").strip()
    return None
