"""End-to-end CLI tests over stub backends and tmp run directories."""

import json

import pytest
import yaml
from click.testing import CliRunner

from summbench import EvaluationRecord
from summbench.cli import main

from conftest import (make_record, stub_chat_rules, stub_model_rules,
                      write_dataset)


@pytest.fixture
def runner():
    return CliRunner()


def varied_records():
    """Records whose rouge scores actually vary, so correlations are defined."""
    extras = ["", " it said", " after debate", " with amendments noted",
              " despite objections raised loudly"]
    records = []
    for i in range(10):
        human = {"coherence": 1.0 + (i % 5), "consistency": 1.0 + ((i + 1) % 5),
                 "fluency": 1.0 + ((i + 2) % 5), "relevance": 1.0 + ((i + 3) % 5)}
        base = make_record(i, system=f"sys{i % 3}", human=human)
        records.append(EvaluationRecord(
            record_id=base.record_id, system_id=base.system_id,
            source_text=base.source_text,
            candidate_summary=base.candidate_summary + extras[i % 5],
            references=base.references, human_scores=base.human_scores))
    return records


@pytest.fixture
def workspace(tmp_path):
    dataset = write_dataset(tmp_path / "data.jsonl", varied_records())
    model_script = tmp_path / "model_stub.json"
    model_script.write_text(json.dumps(
        {"identity": "stub-model-1", "rules": stub_model_rules()}))
    chat_script = tmp_path / "chat_stub.json"
    chat_script.write_text(json.dumps(
        {"identity": "stub-chat-1", "rules": stub_chat_rules()}))
    return tmp_path, dataset, model_script, chat_script


def make_config(tmp_path, dataset, model_script, chat_script, metrics,
                out_name="run", **extra):
    config = {
        "dataset": {"path": str(dataset)},
        "metrics": {m: {} for m in metrics},
        "backends": {
            "model": {"kind": "stub", "script": str(model_script)},
            "chat": {"kind": "stub", "script": str(chat_script),
                     "sampling": {"temperature": 1.0, "top_k": 64,
                                  "top_p": 0.95}},
        },
        "output_dir": str(tmp_path / out_name),
        "seed": 13,
    }
    config.update(extra)
    path = tmp_path / f"{out_name}.yaml"
    path.write_text(yaml.safe_dump(config))
    return path


ALL_METRICS = ["rouge", "bertscore", "bartscore", "unieval", "questeval",
               "geval", "seval_ex"]


def test_list_metrics(runner):
    result = runner.invoke(main, ["list-metrics"])
    assert result.exit_code == 0
    names = [line.split("\t")[0] for line in result.output.splitlines()]
    assert set(ALL_METRICS) <= set(names)


def test_evaluate_rouge_only(runner, workspace):
    tmp_path, dataset, model_script, chat_script = workspace
    config = make_config(tmp_path, dataset, model_script, chat_script, ["rouge"])
    result = runner.invoke(main, ["evaluate", str(config)])
    assert result.exit_code == 0, result.output
    run_dir = tmp_path / "run"
    assert (run_dir / "manifest.json").exists()
    lines = (run_dir / "results.jsonl").read_text().splitlines()
    assert len(lines) == 10
    assert {json.loads(l)["metric_name"] for l in lines} == {"rouge"}
    assert (run_dir / "errors.jsonl").read_text() == ""
    assert (run_dir / "effective_config.yaml").exists()


def test_evaluate_unknown_metric_fatal(runner, workspace):
    tmp_path, dataset, model_script, chat_script = workspace
    config = make_config(tmp_path, dataset, model_script, chat_script,
                         ["made_up_metric"])
    result = runner.invoke(main, ["evaluate", str(config)])
    assert result.exit_code == 1
    assert "made_up_metric" in result.output


def test_evaluate_unknown_config_key_fatal(runner, workspace):
    tmp_path, dataset, model_script, chat_script = workspace
    config = make_config(tmp_path, dataset, model_script, chat_script, ["rouge"],
                         typo_key=True)
    result = runner.invoke(main, ["evaluate", str(config)])
    assert result.exit_code == 1
    assert "typo_key" in result.output


def test_evaluate_all_metrics_stub_end_to_end(runner, workspace):
    tmp_path, dataset, model_script, chat_script = workspace
    config = make_config(tmp_path, dataset, model_script, chat_script, ALL_METRICS)
    result = runner.invoke(main, ["evaluate", str(config)])
    assert result.exit_code == 0, result.output
    lines = (tmp_path / "run/results.jsonl").read_text().splitlines()
    assert len(lines) == 10 * 7


def test_set_override_changes_effective_config(runner, workspace):
    tmp_path, dataset, model_script, chat_script = workspace
    config = make_config(tmp_path, dataset, model_script, chat_script, ["rouge"])
    result = runner.invoke(main, [
        "evaluate", str(config),
        "--set", "metrics.rouge.multi_ref_aggregation=mean"])
    assert result.exit_code == 0, result.output
    effective = yaml.safe_load((tmp_path / "run/effective_config.yaml").read_text())
    assert effective["metrics"]["rouge"]["multi_ref_aggregation"] == "mean"
    manifest = json.loads((tmp_path / "run/manifest.json").read_text())
    rouge_cfg = [c for c in manifest["metric_configs"]
                 if c["metric_name"] == "rouge"][0]
    assert rouge_cfg["params"]["multi_ref_aggregation"] == "mean"


def test_partial_errors_exit_code_2(runner, workspace, tmp_path):
    _, _, model_script, chat_script = workspace
    records = [make_record(1, human={"coherence": 3.0})]
    bare = dict(record_id="norefs::s", system_id="s", source_text="src",
                candidate_summary="cand", references=[], annotations=[])
    dataset = tmp_path / "partial.jsonl"
    with open(dataset, "w") as fh:
        fh.write(json.dumps({
            "record_id": records[0].record_id, "system_id": records[0].system_id,
            "source_text": records[0].source_text,
            "candidate_summary": records[0].candidate_summary,
            "references": list(records[0].references), "annotations": []}) + "\n")
        fh.write(json.dumps(bare) + "\n")
    config = make_config(tmp_path, dataset, model_script, chat_script, ["rouge"],
                         out_name="partial_run")
    result = runner.invoke(main, ["evaluate", str(config)])
    assert result.exit_code == 2
    errors = (tmp_path / "partial_run/errors.jsonl").read_text().splitlines()
    assert len(errors) == 1


def _evaluate(runner, workspace, out_name, metrics=("rouge",)):
    tmp_path, dataset, model_script, chat_script = workspace
    config = make_config(tmp_path, dataset, model_script, chat_script,
                         list(metrics), out_name=out_name)
    result = runner.invoke(main, ["evaluate", str(config)])
    assert result.exit_code == 0, result.output
    return tmp_path / out_name


def test_analyze_single_run(runner, workspace):
    run_dir = _evaluate(runner, workspace, "run_a")
    result = runner.invoke(main, ["analyze", str(run_dir)])
    assert result.exit_code == 0, result.output
    report = json.loads((run_dir / "correlations.json").read_text())
    assert report["entries"]
    assert not (run_dir / "stability.json").exists()


def test_analyze_two_identical_runs_zero_std(runner, workspace):
    run_a = _evaluate(runner, workspace, "run_a")
    run_b = _evaluate(runner, workspace, "run_b")
    result = runner.invoke(main, ["analyze", str(run_a), str(run_b)])
    assert result.exit_code == 0, result.output
    stability = json.loads((run_a / "stability.json").read_text())
    assert stability["entries"]
    assert all(entry["std"] == 0.0 for entry in stability["entries"])


def test_analyze_unjoinable_results_fatal(runner, workspace, tmp_path):
    run_dir = _evaluate(runner, workspace, "run_a")
    human = {"coherence": 3.0, "consistency": 3.0, "fluency": 3.0,
             "relevance": 3.0}
    other = write_dataset(tmp_path / "other.jsonl",
                          [make_record(99, human=human)])
    result = runner.invoke(main, ["analyze", str(run_dir),
                                  "--dataset", str(other)])
    assert result.exit_code == 1
    assert "missing" in result.output


def test_report_defaults_produce_all_formats_and_plots(runner, workspace):
    run_dir = _evaluate(runner, workspace, "run_a")
    assert runner.invoke(main, ["analyze", str(run_dir)]).exit_code == 0
    result = runner.invoke(main, ["report", str(run_dir)])
    assert result.exit_code == 0, result.output
    report_dir = run_dir / "report"
    for name in ("report.json", "report.yaml", "correlations.csv"):
        assert (report_dir / name).exists()
    plots = sorted(p.name for p in (report_dir / "plots").glob("*.png"))
    assert plots == ["correlation_heatmap.png", "delta_vs_reference.png",
                     "timing.png"]


def test_report_format_subset(runner, workspace):
    run_dir = _evaluate(runner, workspace, "run_b")
    result = runner.invoke(main, ["report", str(run_dir),
                                  "--format", "json,csv", "--no-plots"])
    assert result.exit_code == 0, result.output
    report_dir = run_dir / "report"
    assert (report_dir / "report.json").exists()
    assert (report_dir / "correlations.csv").exists()
    assert not (report_dir / "report.yaml").exists()


def test_report_incomplete_run_dir_fatal(runner, tmp_path):
    result = runner.invoke(main, ["report", str(tmp_path)])
    assert result.exit_code == 1
    assert "incomplete" in result.output


def test_convert_dataset_cli(runner, tmp_path):
    upstream = tmp_path / "paired.jsonl"
    upstream.write_text(json.dumps({
        "id": "doc1", "model_id": "M3", "decoded": "The summary.",
        "text": "The article.", "references": ["Ref."],
        "expert_annotations": [{"coherence": 4, "consistency": 4,
                                "fluency": 4, "relevance": 4}]}) + "\n")
    out = tmp_path / "normalized.jsonl"
    result = runner.invoke(main, ["convert-dataset", "--from-summeval",
                                  str(upstream), "-", "-o", str(out)])
    assert result.exit_code == 0, result.output
    assert "wrote 1 records" in result.output
    record = json.loads(out.read_text())
    assert record["record_id"] == "doc1::M3"
