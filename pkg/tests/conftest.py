import json
from pathlib import Path

import pytest

from summbench import BackendSuite, EvaluationRecord, SamplingParams, StubBackend

FIXTURES = Path(__file__).parent / "fixtures"


def stub_chat_rules():
    # substrings chosen to survive the hard wraps inside the templates
    return [
        {"contains": "atomic statements", "response": "1. A was hired.\n2. A resigned."},
        {"contains": "Is the claim supported by the source", "response": "supported"},
        {"contains": "single integer", "response": "4"},
    ]


def stub_model_rules():
    return [
        {"contains": "short factual questions",
         "response": "1. What happened? | an event\n2. Who was there? | some people"},
        {"contains": "Answer the question using", "response": "an event"},
    ]


@pytest.fixture
def stub_suite():
    return BackendSuite(
        model=StubBackend("stub-model-1", rules=stub_model_rules()),
        chat=StubBackend("stub-chat-1", rules=stub_chat_rules()),
        chat_sampling=SamplingParams(),
        model_backend_id="model",
        chat_backend_id="chat",
    )


def make_record(i: int, system: str = "sysA", human=None) -> EvaluationRecord:
    return EvaluationRecord(
        record_id=f"doc{i}::{system}",
        system_id=system,
        source_text=f"Document {i}: the committee met on day {i} and approved "
                    f"the annual budget after a long debate.",
        candidate_summary=f"The committee approved the budget on day {i}.",
        references=(f"On day {i} the committee approved the annual budget.",),
        human_scores=human,
    )


@pytest.fixture
def fixture_records():
    records = []
    for i in range(10):
        human = {"coherence": 1.0 + (i % 5), "consistency": 1.0 + ((i + 1) % 5),
                 "fluency": 1.0 + ((i + 2) % 5), "relevance": 1.0 + ((i + 3) % 5)}
        records.append(make_record(i, system=f"sys{i % 3}", human=human))
    return records


def write_dataset(path: Path, records) -> Path:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            annotations = []
            if r.human_scores:
                annotations.append({"annotator_class": "expert",
                                    **{k: int(v) for k, v in r.human_scores.items()}})
            fh.write(json.dumps({
                "record_id": r.record_id, "system_id": r.system_id,
                "source_text": r.source_text,
                "candidate_summary": r.candidate_summary,
                "references": list(r.references),
                "annotations": annotations,
            }) + "\n")
    return path
