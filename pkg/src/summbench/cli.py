"""Command-line entry points: evaluate, analyze, report, list-metrics,
convert-dataset.

A single declarative YAML config drives evaluation; ``--set key=value``
overrides individual fields and the merged result is frozen alongside the
manifest, so the run directory always records what actually ran.

Exit codes: 0 success, 1 fatal config/IO error, 2 partial success
(per-record errors present).
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import click
import yaml

from .analysis import (COEFFICIENTS, GRANULARITIES, ReferenceTable, correlate,
                       stability)
from .backends import (BackendSuite, HttpChatBackend, HttpModelBackend,
                       SamplingParams, StubBackend)
from .canonical import json_line
from .dataset import IngestionOptions, convert_summeval, load_dataset
from .errors import ConfigError, SummbenchError
from .evaluator import (Evaluator, ResultCache, load_run_dir, new_manifest,
                        time_metric, write_run_dir)
from .records import audit_manifest
from .registry import get_descriptor, list_metrics
from .report import FORMATS, RunBundle, write_report

log = logging.getLogger(__name__)

ENDPOINT_ENV_VAR = "SUMMBENCH_ENDPOINT"

_TOP_KEYS = {"dataset", "metrics", "backends", "analysis", "output_dir",
             "seed", "workers", "cache"}
_DATASET_KEYS = {"path", "aggregation_policy", "keep_unannotated"}
_BACKEND_KEYS = {"kind", "script", "endpoint", "model", "sampling",
                 "max_attempts", "initial_backoff", "timeout", "max_inflight"}
_ANALYSIS_KEYS = {"granularity", "coefficient", "reference_table"}


def _reject_unknown(section: dict, allowed: set[str], where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def load_config(path: Path, overrides: tuple[str, ...] = ()) -> dict:
    with open(path, encoding="utf-8") as fh:
        config = yaml.safe_load(fh) or {}
    if not isinstance(config, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    for override in overrides:
        if "=" not in override:
            raise ConfigError(f"--set needs key=value, got {override!r}")
        key, _, raw_value = override.partition("=")
        node = config
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set {key}: {part} is not a mapping")
        node[parts[-1]] = yaml.safe_load(raw_value)
    validate_config(config)
    return config


def validate_config(config: dict) -> None:
    _reject_unknown(config, _TOP_KEYS, "config")
    dataset = config.get("dataset")
    if not isinstance(dataset, dict) or "path" not in dataset:
        raise ConfigError("config: dataset.path is required")
    _reject_unknown(dataset, _DATASET_KEYS, "config.dataset")
    metrics = config.get("metrics")
    if not isinstance(metrics, dict) or not metrics:
        raise ConfigError("config: metrics must name at least one metric")
    for name in metrics:
        get_descriptor(name)  # raises on unknown metric
    for side, section in (config.get("backends") or {}).items():
        if side not in ("model", "chat"):
            raise ConfigError(f"config.backends: unknown backend role {side!r}")
        _reject_unknown(section or {}, _BACKEND_KEYS, f"config.backends.{side}")
    analysis = config.get("analysis") or {}
    _reject_unknown(analysis, _ANALYSIS_KEYS, "config.analysis")
    if analysis.get("granularity", "summary_level") not in GRANULARITIES:
        raise ConfigError("config.analysis.granularity must be one of "
                          f"{GRANULARITIES}")
    if analysis.get("coefficient", "spearman") not in COEFFICIENTS:
        raise ConfigError(f"config.analysis.coefficient must be one of {COEFFICIENTS}")
    if "output_dir" not in config:
        raise ConfigError("config: output_dir is required")


def _build_backend(section: dict, role: str):
    kind = section.get("kind", "stub")
    if kind == "stub":
        if section.get("script"):
            backend = StubBackend.from_script(section["script"])
        else:
            backend = StubBackend(identity=section.get("model", f"stub-{role}"))
        return backend
    if kind == "http":
        endpoint = os.environ.get(ENDPOINT_ENV_VAR) or section.get("endpoint")
        if not endpoint:
            raise ConfigError(f"config.backends.{role}: endpoint required for kind=http "
                              f"(or set ${ENDPOINT_ENV_VAR})")
        kwargs = {k: section[k] for k in ("max_attempts", "initial_backoff",
                                          "timeout", "max_inflight") if k in section}
        cls = HttpChatBackend if role == "chat" else HttpModelBackend
        return cls(endpoint, section.get("model", "default"), **kwargs)
    raise ConfigError(f"config.backends.{role}: unknown kind {kind!r}")


def build_suite(config: dict) -> BackendSuite:
    backends = config.get("backends") or {}
    suite = BackendSuite()
    if "model" in backends:
        suite.model = _build_backend(backends["model"], "model")
    if "chat" in backends:
        chat_cfg = backends["chat"]
        suite.chat = _build_backend(chat_cfg, "chat")
        sampling_cfg = dict(chat_cfg.get("sampling") or {})
        if config.get("seed") is not None and "seed" not in sampling_cfg:
            sampling_cfg["seed"] = config["seed"]
        suite.chat_sampling = SamplingParams(**sampling_cfg)
    return suite


def _probe_backends(suite: BackendSuite, metric_names: list[str]) -> None:
    needs = set()
    for name in metric_names:
        needs |= set(get_descriptor(name).backend_requirements)
    for role, backend in (("model", suite.model), ("chat", suite.chat)):
        if role in needs:
            if backend is None:
                raise ConfigError(f"metrics require a {role} backend but none is "
                                  f"configured")
            probe = getattr(backend, "probe", None)
            if probe is not None:
                try:
                    probe()
                except SummbenchError as exc:
                    raise ConfigError(f"{role} backend unreachable: {exc}") from exc


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose: bool):
    """Summarization-metric benchmark with reproducible run manifests."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command("list-metrics")
def cmd_list_metrics():
    """List registered metrics."""
    for name in list_metrics():
        descriptor = get_descriptor(name)
        needs = ",".join(sorted(descriptor.backend_requirements))
        refs = "refs" if descriptor.requires_references else "no-refs"
        click.echo(f"{name}\t[{refs}, backend: {needs}]")


@main.command("evaluate")
@click.argument("config_path", type=click.Path(exists=True, path_type=Path))
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
              help="Override a config field (dotted path).")
def cmd_evaluate(config_path: Path, overrides: tuple[str, ...]):
    """Run the configured metrics over the dataset into a run directory."""
    try:
        config = load_config(config_path, overrides)
        suite = build_suite(config)
        metric_names = sorted(config["metrics"])
        _probe_backends(suite, metric_names)
        options = IngestionOptions(
            aggregation_policy=config["dataset"].get("aggregation_policy",
                                                     "expert_mean"),
            keep_unannotated=config["dataset"].get("keep_unannotated", True))
        records, summary = load_dataset(config["dataset"]["path"], options)
        click.echo(f"loaded {summary.n_summaries} summaries from "
                   f"{summary.n_systems} systems")
        manifest = new_manifest(dataset_id=str(config["dataset"]["path"]),
                                backends=suite, seed=config.get("seed"))
        out_dir = Path(config["output_dir"])
        out_dir.mkdir(parents=True, exist_ok=True)
        effective = yaml.safe_dump(config, sort_keys=True)
        (out_dir / "effective_config.yaml").write_text(effective, encoding="utf-8")
        manifest.environment["config_hash"] = hashlib.sha256(
            effective.encode("utf-8")).hexdigest()
        cache = None
        if config.get("cache"):
            cache = ResultCache(Path(config["cache"]))
        evaluator = Evaluator(metric_params=config["metrics"], backends=suite,
                              workers=config.get("workers", 1), cache=cache)
        outcome = evaluator.evaluate(records, metric_names, manifest)
        write_run_dir(out_dir, manifest, outcome)
        problems = audit_manifest(manifest, outcome.results)
        for problem in problems:
            click.echo(f"manifest audit: {problem}", err=True)
        click.echo(f"run {manifest.run_id}: {len(outcome.results)} results, "
                   f"{len(outcome.errors)} errors -> {out_dir}")
    except (SummbenchError, OSError) as exc:
        click.echo(f"fatal: {exc}", err=True)
        sys.exit(1)
    if outcome.errors or problems:
        sys.exit(2)


@main.command("analyze")
@click.argument("run_dirs", nargs=-1, required=True,
                type=click.Path(exists=True, path_type=Path))
@click.option("--granularity", type=click.Choice(GRANULARITIES),
              default="summary_level", show_default=True)
@click.option("--coefficient", type=click.Choice(COEFFICIENTS),
              default="spearman", show_default=True)
@click.option("--dataset", "dataset_path", type=click.Path(path_type=Path),
              default=None, help="Override the dataset path from the manifest.")
@click.option("--reference", "reference_path", type=click.Path(path_type=Path),
              default=None, help="Reference-value CSV (default: bundled table).")
def cmd_analyze(run_dirs, granularity, coefficient, dataset_path, reference_path):
    """Correlate run results with human judgments; add stability for >=2 runs."""
    try:
        reference = ReferenceTable.from_csv(reference_path)
        reports = []
        for run_dir in run_dirs:
            manifest, results, _ = load_run_dir(run_dir)
            path = dataset_path or Path(manifest.dataset_id)
            records, _ = load_dataset(path)
            known = {r.record_id for r in records}
            missing = sorted({r.record_id for r in results} - known)
            if missing:
                raise SummbenchError(
                    f"{run_dir}: results reference record_ids missing from "
                    f"{path}: {missing[:10]}{'...' if len(missing) > 10 else ''}")
            report = correlate(results, records, granularity=granularity,
                               coefficient=coefficient, reference=reference)
            (Path(run_dir) / "correlations.json").write_text(
                json_line(report.to_dict()), encoding="utf-8")
            reports.append(report)
            click.echo(f"{run_dir}: {len(report.entries)} correlation entries, "
                       f"{len(report.errors)} errors")
        if len(reports) >= 2:
            stab = stability(reports)
            out = Path(run_dirs[0]) / "stability.json"
            out.write_text(json_line(stab.to_dict()), encoding="utf-8")
            click.echo(f"stability over {len(reports)} runs -> {out}")
    except (SummbenchError, OSError) as exc:
        click.echo(f"fatal: {exc}", err=True)
        sys.exit(1)


@main.command("report")
@click.argument("run_dir", type=click.Path(exists=True, path_type=Path))
@click.option("--format", "formats", default="json,yaml,csv", show_default=True,
              help="Comma-separated subset of json,yaml,csv.")
@click.option("--plots/--no-plots", default=True, show_default=True)
def cmd_report(run_dir: Path, formats: str, plots: bool):
    """Serialize a completed run (and its analyses) to report files."""
    try:
        manifest, results, _ = load_run_dir(run_dir)
        correlations = None
        corr_path = Path(run_dir) / "correlations.json"
        if corr_path.exists():
            from .analysis import CorrelationReport
            correlations = CorrelationReport.from_dict(
                json.loads(corr_path.read_text(encoding="utf-8")))
        else:
            dataset_file = Path(manifest.dataset_id)
            if dataset_file.exists():
                records, _ = load_dataset(dataset_file)
                correlations = correlate(results, records,
                                         reference=ReferenceTable.from_csv())
        stability_report = None
        stab_path = Path(run_dir) / "stability.json"
        if stab_path.exists():
            from .analysis import StabilityReport
            stability_report = StabilityReport.from_dict(
                json.loads(stab_path.read_text(encoding="utf-8")))
        bundle = RunBundle(manifest=manifest, results=results,
                           correlations=correlations, stability=stability_report,
                           timings=time_metric(results) if results else {})
        wanted = tuple(f.strip() for f in formats.split(",") if f.strip())
        for fmt in wanted:
            if fmt not in FORMATS:
                raise SummbenchError(f"unsupported format {fmt!r}")
        written = write_report(bundle, Path(run_dir) / "report", formats=wanted,
                               plots=plots)
        for path in written:
            click.echo(str(path))
    except (SummbenchError, OSError) as exc:
        click.echo(f"fatal: {exc}", err=True)
        sys.exit(1)


@main.command("convert-dataset")
@click.option("--from-summeval", "summeval", nargs=2, type=str, required=True,
              metavar="ANNOTATIONS ARTICLES_DIR",
              help="Upstream paired-annotation file and article directory "
                   "('-' for no directory).")
@click.option("-o", "--out", "out_path", required=True,
              type=click.Path(path_type=Path))
def cmd_convert_dataset(summeval, out_path: Path):
    """Convert an upstream dataset release to the normalized JSON-lines schema."""
    annotations, articles_dir = summeval
    try:
        count = convert_summeval(Path(annotations),
                                 None if articles_dir == "-" else Path(articles_dir),
                                 out_path)
        click.echo(f"wrote {count} records -> {out_path}")
    except (SummbenchError, OSError) as exc:
        click.echo(f"fatal: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
