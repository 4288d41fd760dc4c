"""Run-bundle serialization (JSON/YAML/CSV) and comparison plots.

Output is deterministic: sorted keys, 6-significant-digit floats, fixed
file names. Plots render headlessly to PNG files only.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import yaml  # noqa: E402

from .analysis import CorrelationReport, StabilityReport  # noqa: E402
from .canonical import json_dumps, round_floats  # noqa: E402
from .errors import PreconditionError  # noqa: E402
from .records import MetricResult, RunManifest  # noqa: E402

log = logging.getLogger(__name__)

FORMATS = ("json", "yaml", "csv")


@dataclass
class RunBundle:
    manifest: RunManifest
    results: list[MetricResult]
    correlations: Optional[CorrelationReport] = None
    stability: Optional[StabilityReport] = None
    timings: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "manifest": self.manifest.to_dict(),
            "results": [r.to_dict(include_timing=False) for r in self.results],
            "correlations": self.correlations.to_dict() if self.correlations else None,
            "stability": self.stability.to_dict() if self.stability else None,
            "timings": dict(self.timings),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunBundle":
        return cls(
            manifest=RunManifest.from_dict(data["manifest"]),
            results=[MetricResult.from_dict(r) for r in data.get("results", [])],
            correlations=(CorrelationReport.from_dict(data["correlations"])
                          if data.get("correlations") else None),
            stability=(StabilityReport.from_dict(data["stability"])
                       if data.get("stability") else None),
            timings={k: float(v) for k, v in data.get("timings", {}).items()},
        )


def serialize(bundle: RunBundle, fmt: str) -> bytes:
    """Render the bundle to one of json/yaml/csv, deterministically."""
    if fmt == "json":
        return (json_dumps(bundle.to_dict()) + "\n").encode("utf-8")
    if fmt == "yaml":
        return yaml.safe_dump(round_floats(bundle.to_dict()), sort_keys=True,
                              allow_unicode=True, default_flow_style=False
                              ).encode("utf-8")
    if fmt == "csv":
        return _correlations_csv(bundle)
    raise PreconditionError(f"unsupported format {fmt!r}; choose from {FORMATS}")


def _correlations_csv(bundle: RunBundle) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["metric_name", "dimension", "granularity", "coefficient",
                     "value", "n", "delta_vs_reference"])
    entries = bundle.correlations.entries if bundle.correlations else []
    for e in entries:
        writer.writerow([e.metric_name, e.dimension, e.granularity, e.coefficient,
                         round_floats(e.value), e.n,
                         "" if e.delta_vs_reference is None
                         else round_floats(e.delta_vs_reference)])
    return buf.getvalue().encode("utf-8")


# |delta| buckets mirroring the three-way shading used in correlation
# comparison tables: small / moderate / large deviation
_DELTA_BUCKETS = ((0.05, "#4caf50"), (0.10, "#ff9800"), (float("inf"), "#f44336"))


def _delta_color(delta: float) -> str:
    for threshold, color in _DELTA_BUCKETS:
        if abs(delta) < threshold or threshold == float("inf"):
            return color
    return _DELTA_BUCKETS[-1][1]


def render_plots(bundle: RunBundle, out_dir: Path) -> list[Path]:
    """Emit heatmap, delta chart, and timing chart; returns written files."""
    out_dir = Path(out_dir)
    written: list[Path] = []
    has_correlations = bundle.correlations is not None and bundle.correlations.entries
    if not has_correlations and not bundle.timings:
        log.info("nothing to plot for run %s", bundle.manifest.run_id)
        return written
    out_dir.mkdir(parents=True, exist_ok=True)

    if has_correlations:
        written.append(_heatmap(bundle.correlations, out_dir))
        delta_path = _delta_chart(bundle.correlations, out_dir)
        if delta_path:
            written.append(delta_path)
    if bundle.timings:
        written.append(_timing_chart(bundle.timings, out_dir))
    return written


def _heatmap(correlations: CorrelationReport, out_dir: Path) -> Path:
    metrics = sorted({e.metric_name for e in correlations.entries})
    dims = sorted({e.dimension for e in correlations.entries})
    grid = np.full((len(metrics), len(dims)), np.nan)
    for e in correlations.entries:
        grid[metrics.index(e.metric_name), dims.index(e.dimension)] = e.value
    fig, ax = plt.subplots(figsize=(2 + len(dims), 1 + 0.5 * len(metrics)))
    im = ax.imshow(grid, vmin=-1, vmax=1, cmap="RdBu_r", aspect="auto")
    ax.set_xticks(range(len(dims)), dims, rotation=30, ha="right")
    ax.set_yticks(range(len(metrics)), metrics)
    for i in range(len(metrics)):
        for j in range(len(dims)):
            if not np.isnan(grid[i, j]):
                ax.text(j, i, f"{grid[i, j]:.2f}", ha="center", va="center",
                        fontsize=8)
    fig.colorbar(im, ax=ax, label="correlation")
    ax.set_title("Metric vs human-judgment correlation")
    path = out_dir / "correlation_heatmap.png"
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def _delta_chart(correlations: CorrelationReport, out_dir: Path) -> Optional[Path]:
    entries = [e for e in correlations.entries if e.delta_vs_reference is not None]
    fig, ax = plt.subplots(figsize=(8, max(2, 0.35 * max(1, len(entries)))))
    if entries:
        labels = [f"{e.metric_name} / {e.dimension}" for e in entries]
        deltas = [e.delta_vs_reference for e in entries]
        colors = [_delta_color(d) for d in deltas]
        ax.barh(labels, deltas, color=colors)
        ax.axvline(0.0, color="black", linewidth=0.8)
    ax.set_xlabel("measured − reference")
    ax.set_title("Deviation from reported reference values")
    path = out_dir / "delta_vs_reference.png"
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def _timing_chart(timings: dict[str, float], out_dir: Path) -> Path:
    metrics = sorted(timings)
    fig, ax = plt.subplots(figsize=(6, max(2, 0.4 * len(metrics))))
    ax.barh(metrics, [timings[m] for m in metrics], color="#607d8b")
    ax.set_xlabel("total wall time (s)")
    ax.set_title("Execution cost per metric")
    path = out_dir / "timing.png"
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def write_report(bundle: RunBundle, out_dir: Path,
                 formats: tuple[str, ...] = FORMATS,
                 plots: bool = True) -> list[Path]:
    """Standard output layout: report.{json,yaml}, correlations.csv, plots/."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    names = {"json": "report.json", "yaml": "report.yaml", "csv": "correlations.csv"}
    for fmt in formats:
        if fmt not in FORMATS:
            raise PreconditionError(f"unsupported format {fmt!r}")
        path = out_dir / names[fmt]
        path.write_bytes(serialize(bundle, fmt))
        written.append(path)
    if plots:
        written.extend(render_plots(bundle, out_dir / "plots"))
    return written
