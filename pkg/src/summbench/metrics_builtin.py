"""The seven built-in metrics, adapted to the common metric interface.

Six metric families come from the comparison this framework supports, with
the embedding greedy-matching score as a seventh; all register themselves
on import.
"""

from __future__ import annotations

from .backends import BackendSuite
from .errors import PreconditionError
from .llm_metrics import geval_score, seval_extract, seval_score, seval_verify
from .model_metrics import bartscore, bertscore, questeval, unieval
from .prompts import load_template
from .records import DIMENSIONS, EvaluationRecord, MetricDescriptor
from .registry import TextMetric, register_metric
from .rouge import RougeConfig, rouge_multi_ref


class RougeMetric(TextMetric):
    def __init__(self, params: dict, backends: BackendSuite):
        defaults = {"variants": ["rouge1", "rouge2", "rougeL"],
                    "multi_ref_aggregation": "max", "use_stemming": False,
                    "lowercase": True, "score_kind": "f1"}
        defaults.update(params)
        super().__init__(_DESCRIPTORS["rouge"], defaults)
        self.config = RougeConfig(
            variants=tuple(defaults["variants"]),
            multi_ref_aggregation=defaults["multi_ref_aggregation"],
            use_stemming=defaults["use_stemming"],
            lowercase=defaults["lowercase"],
            score_kind=defaults["score_kind"],
        )

    def compute(self, record: EvaluationRecord):
        if not record.has_references:
            raise PreconditionError(
                f"record {record.record_id!r} has no references; rouge needs at least one")
        triples = rouge_multi_ref(record.candidate_summary,
                                  list(record.references), self.config)
        scores = {}
        for variant, (recall, precision, f1) in triples.items():
            scores[f"{variant}_r"] = recall
            scores[f"{variant}_p"] = precision
            scores[f"{variant}_f"] = f1
        provenance = {"multi_ref_aggregation": self.config.multi_ref_aggregation}
        return scores, provenance


class BertScoreMetric(TextMetric):
    def __init__(self, params: dict, backends: BackendSuite):
        defaults = {"use_idf": False, "multi_ref_aggregation": "max"}
        defaults.update(params)
        super().__init__(_DESCRIPTORS["bertscore"], defaults)
        self.backends = backends

    def compute(self, record: EvaluationRecord):
        if not record.has_references:
            raise PreconditionError(
                f"record {record.record_id!r} has no references; bertscore needs one")
        backend = self.backends.require_model()
        triples = [bertscore(record.candidate_summary, ref, backend)
                   for ref in record.references]
        if self.params["multi_ref_aggregation"] == "max":
            recall, precision, f1 = max(triples, key=lambda t: t[2])
        else:
            k = len(triples)
            recall, precision, f1 = (sum(t[i] for t in triples) / k for i in range(3))
        scores = {"recall": recall, "precision": precision, "f1": f1}
        provenance = {"backend_id": self.backends.model_backend_id,
                      "model": backend.identity,
                      "multi_ref_aggregation": self.params["multi_ref_aggregation"]}
        return scores, provenance


class BartScoreMetric(TextMetric):
    def __init__(self, params: dict, backends: BackendSuite):
        defaults = {"direction": "src_to_tgt"}
        defaults.update(params)
        super().__init__(_DESCRIPTORS["bartscore"], defaults)
        self.backends = backends

    def compute(self, record: EvaluationRecord):
        backend = self.backends.require_model()
        value = bartscore(record.source_text, record.candidate_summary,
                          backend, direction=self.params["direction"])
        provenance = {"backend_id": self.backends.model_backend_id,
                      "model": backend.identity,
                      "direction": self.params["direction"]}
        return {"overall": value}, provenance


class UniEvalMetric(TextMetric):
    def __init__(self, params: dict, backends: BackendSuite):
        defaults = {"dimensions": list(DIMENSIONS)}
        defaults.update(params)
        super().__init__(_DESCRIPTORS["unieval"], defaults)
        self.backends = backends

    def manifest_params(self) -> dict:
        params = dict(self.params)
        params["prompt_hashes"] = {dim: load_template(f"unieval_{dim}")[1]
                                   for dim in self.params["dimensions"]}
        return params

    def compute(self, record: EvaluationRecord):
        backend = self.backends.require_model()
        scores = {}
        provenance = {"backend_id": self.backends.model_backend_id,
                      "model": backend.identity}
        for dim in self.params["dimensions"]:
            scores[dim] = unieval(record, dim, backend)
            provenance[f"{dim}_prompt_hash"] = load_template(f"unieval_{dim}")[1]
        return scores, provenance


class QuestEvalMetric(TextMetric):
    def __init__(self, params: dict, backends: BackendSuite):
        defaults = {"n_questions": 5}
        defaults.update(params)
        super().__init__(_DESCRIPTORS["questeval"], defaults)
        self.backends = backends

    def manifest_params(self) -> dict:
        params = dict(self.params)
        params["prompt_hashes"] = {name: load_template(f"questeval_{name}")[1]
                                   for name in ("generate", "answer")}
        return params

    def compute(self, record: EvaluationRecord):
        backend = self.backends.require_model()
        value = questeval(record, backend, n_questions=self.params["n_questions"])
        provenance = {"backend_id": self.backends.model_backend_id,
                      "model": backend.identity,
                      "generate_prompt_hash": load_template("questeval_generate")[1],
                      "answer_prompt_hash": load_template("questeval_answer")[1]}
        return {"overall": value}, provenance


class GEvalMetric(TextMetric):
    def __init__(self, params: dict, backends: BackendSuite):
        defaults = {"dimensions": list(DIMENSIONS)}
        defaults.update(params)
        super().__init__(_DESCRIPTORS["geval"], defaults)
        self.backends = backends

    def manifest_params(self) -> dict:
        params = dict(self.params)
        params["prompt_hashes"] = {dim: load_template(f"geval_{dim}")[1]
                                   for dim in self.params["dimensions"]}
        params["sampling"] = self.backends.chat_sampling.to_dict()
        return params

    def compute(self, record: EvaluationRecord):
        backend = self.backends.require_chat()
        sampling = self.backends.chat_sampling
        scores = {}
        provenance = {"backend_id": self.backends.chat_backend_id,
                      "model": backend.identity,
                      "sampling": str(sampling.to_dict())}
        if sampling.seed is not None:
            provenance["seed"] = str(sampling.seed)
        for dim in self.params["dimensions"]:
            value, details = geval_score(record, dim, backend, sampling)
            scores[dim] = value
            provenance[f"{dim}_prompt_hash"] = details["prompt_hash"]
            if details["n_parse_failures"]:
                provenance[f"{dim}_parse_failures"] = str(details["n_parse_failures"])
        return scores, provenance


class SEvalExMetric(TextMetric):
    def __init__(self, params: dict, backends: BackendSuite):
        super().__init__(_DESCRIPTORS["seval_ex"], params)
        self.backends = backends

    def manifest_params(self) -> dict:
        params = dict(self.params)
        params["prompt_hashes"] = {name: load_template(f"seval_{name}")[1]
                                   for name in ("extract", "verify")}
        params["sampling"] = self.backends.chat_sampling.to_dict()
        return params

    def compute(self, record: EvaluationRecord):
        backend = self.backends.require_chat()
        sampling = self.backends.chat_sampling
        statements = seval_extract(record.candidate_summary, backend, sampling)
        verified = seval_verify(statements, record.source_text, backend, sampling)
        value = seval_score(verified)
        provenance = {"backend_id": self.backends.chat_backend_id,
                      "model": backend.identity,
                      "sampling": str(sampling.to_dict()),
                      "n_statements": str(len(verified.statements)),
                      "extract_prompt_hash": load_template("seval_extract")[1],
                      "verify_prompt_hash": load_template("seval_verify")[1]}
        if sampling.seed is not None:
            provenance["seed"] = str(sampling.seed)
        return {"overall": value}, provenance


_DESCRIPTORS = {
    "rouge": MetricDescriptor(
        name="rouge", requires_references=True, requires_source=False,
        dimensions_produced=frozenset({"overall"}),
        backend_requirements=frozenset({"none"})),
    "bertscore": MetricDescriptor(
        name="bertscore", requires_references=True, requires_source=False,
        dimensions_produced=frozenset({"overall"}),
        backend_requirements=frozenset({"model"})),
    "bartscore": MetricDescriptor(
        name="bartscore", requires_references=False, requires_source=True,
        dimensions_produced=frozenset({"overall"}),
        backend_requirements=frozenset({"model"})),
    "unieval": MetricDescriptor(
        name="unieval", requires_references=False, requires_source=True,
        dimensions_produced=frozenset(DIMENSIONS),
        backend_requirements=frozenset({"model"})),
    "questeval": MetricDescriptor(
        name="questeval", requires_references=False, requires_source=True,
        dimensions_produced=frozenset({"overall"}),
        backend_requirements=frozenset({"model"})),
    "geval": MetricDescriptor(
        name="geval", requires_references=False, requires_source=True,
        dimensions_produced=frozenset(DIMENSIONS),
        backend_requirements=frozenset({"chat"})),
    "seval_ex": MetricDescriptor(
        name="seval_ex", requires_references=False, requires_source=True,
        dimensions_produced=frozenset({"overall"}),
        backend_requirements=frozenset({"chat"})),
}

_FACTORIES = {
    "rouge": RougeMetric,
    "bertscore": BertScoreMetric,
    "bartscore": BartScoreMetric,
    "unieval": UniEvalMetric,
    "questeval": QuestEvalMetric,
    "geval": GEvalMetric,
    "seval_ex": SEvalExMetric,
}

BUILTIN_METRICS = tuple(sorted(_FACTORIES))


def register_builtins() -> None:
    from . import registry
    for name in BUILTIN_METRICS:
        if name not in registry._registry:
            register_metric(_DESCRIPTORS[name], _FACTORIES[name])


register_builtins()
