"""summbench: unified summarization-metric benchmark with reproducible runs."""

from . import metrics_builtin  # noqa: F401  (registers the built-in metrics)
from .analysis import (CorrelationReport, ReferenceTable, StabilityReport,
                       correlate, kendall, pearson, spearman, stability)
from .backends import (BackendSuite, ChatBackend, HttpChatBackend,
                       HttpModelBackend, ModelBackend, SamplingParams, StubBackend)
from .dataset import (DatasetSummary, IngestionOptions, RawAnnotation,
                      aggregate_annotations, convert_summeval, load_dataset)
from .evaluator import (EvaluationOutcome, Evaluator, ResultCache, load_run_dir,
                        new_manifest, time_metric, write_run_dir)
from .records import (DIMENSIONS, EvaluationRecord, MetricDescriptor,
                      MetricResult, RunManifest, audit_manifest)
from .registry import TextMetric, create_metric, list_metrics, register_metric
from .report import RunBundle, render_plots, serialize, write_report

__version__ = "0.1.0"

__all__ = [
    "BackendSuite", "ChatBackend", "CorrelationReport", "DIMENSIONS",
    "DatasetSummary", "EvaluationOutcome", "EvaluationRecord", "Evaluator",
    "HttpChatBackend", "HttpModelBackend", "IngestionOptions", "MetricDescriptor",
    "MetricResult", "ModelBackend", "RawAnnotation", "ReferenceTable",
    "ResultCache", "RunBundle", "RunManifest", "SamplingParams", "StabilityReport",
    "StubBackend", "TextMetric", "aggregate_annotations", "audit_manifest",
    "convert_summeval", "correlate", "create_metric", "kendall", "list_metrics",
    "load_dataset", "load_run_dir", "new_manifest", "pearson", "register_metric",
    "render_plots", "serialize", "spearman", "stability", "time_metric",
    "write_report", "write_run_dir",
]
