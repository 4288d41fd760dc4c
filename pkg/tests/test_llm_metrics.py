"""Judge-metric tests: score parsing, rubric scoring, statement pipeline."""

import itertools

import pytest

from summbench import EvaluationRecord, SamplingParams, StubBackend
from summbench.errors import ExtractionError, PreconditionError
from summbench.llm_metrics import (ParseFailure, StatementSet, geval_score,
                                   parse_score, parse_verdict, seval_extract,
                                   seval_score, seval_verify)

SAMPLING = SamplingParams()


def _record():
    return EvaluationRecord("r1", "s1", "the source text", "the summary text")


# --- parse_score -----------------------------------------------------------

PARSE_OK = [
    ("4", 4),
    ("3", 3),
    ("Score: 3 because it flows well", 3),
    ("score: 5", 5),
    ("Rating: 2.", 2),
    ("I'd rate this 4/5", 4),
    ("3/5", 3),
    ("**4**", 4),
    ("`5`", 5),
    ("The score is 1", 1),
    ("  2  ", 2),
    ("Answer: 4 out of 5", 4),
    ("Coherence score: 5", 5),
    ("2 - the summary repeats itself", 2),
    ("Final verdict: 3.", 3),
]

PARSE_FAIL = [
    "I cannot evaluate this.",
    "banana",
    "",
    "7",
    "0",
    "-1",
    "Score: 9",
    "ten out of ten",
    "4.5",
    "100%",
]


@pytest.mark.parametrize("completion,expected", PARSE_OK)
def test_parse_score_accepts(completion, expected):
    assert parse_score(completion, 1, 5) == expected


@pytest.mark.parametrize("completion", PARSE_FAIL)
def test_parse_score_rejects(completion):
    with pytest.raises(ParseFailure):
        parse_score(completion, 1, 5)


def test_parse_score_precondition():
    with pytest.raises(PreconditionError):
        parse_score("3", 5, 1)


# --- geval_score -----------------------------------------------------------


def _seq_backend(responses):
    backend = StubBackend("chat")
    it = itertools.cycle(responses) if len(responses) == 1 else iter(responses)
    backend.generate = lambda prompt: next(it)
    return backend


def test_geval_single_sample():
    value, details = geval_score(_record(), "coherence", _seq_backend(["4"]), SAMPLING)
    assert value == 4.0
    assert details["n_parsed"] == 1


def test_geval_mean_of_two():
    sampling = SamplingParams(n_samples=2)
    value, _ = geval_score(_record(), "relevance", _seq_backend(["3", "5"]), sampling)
    assert value == 4.0


def test_geval_partial_parse_failures_excluded():
    sampling = SamplingParams(n_samples=3)
    value, details = geval_score(
        _record(), "fluency",
        _seq_backend(["Score: 3", "I'd rate this 4/5", "banana"]), sampling)
    assert value == pytest.approx(3.5)
    assert details["n_parse_failures"] == 1


def test_geval_all_unparseable_is_error():
    with pytest.raises(ExtractionError):
        geval_score(_record(), "coherence", _seq_backend(["nope"]), SAMPLING)


def test_geval_range_and_provenance_hash():
    value, details = geval_score(_record(), "consistency", _seq_backend(["5"]),
                                 SAMPLING)
    assert 1.0 <= value <= 5.0
    assert len(details["prompt_hash"]) == 64


# --- seval pipeline --------------------------------------------------------


def _chat(response):
    return StubBackend("chat", rules=[{"contains": "", "response": response}])


def test_extract_numbered_list():
    out = seval_extract("s", _chat("1. A was hired.\n2. A resigned."), SAMPLING)
    assert out.statements == ["A was hired.", "A resigned."]


def test_extract_skips_blank_item():
    out = seval_extract("s", _chat("1. First fact.\n2.\n3. Second fact."), SAMPLING)
    assert out.statements == ["First fact.", "Second fact."]


def test_extract_deduplicates():
    out = seval_extract("s", _chat("1. Same fact.\n2. Same fact."), SAMPLING)
    assert out.statements == ["Same fact."]


def test_extract_free_text_is_error():
    with pytest.raises(ExtractionError):
        seval_extract("s", _chat("No list here, just prose."), SAMPLING)


def test_verify_pass_through_and_mapping():
    statements = StatementSet(statements=["sa", "sb"])
    backend = StubBackend("chat", rules=[
        {"contains": "sa", "response": "yes"},
        {"contains": "sb", "response": "no"},
    ])
    verified = seval_verify(statements, "src", backend, SAMPLING)
    assert verified.verdicts == ["supported", "unsupported"]


def test_verify_garbage_defaults_unsupported():
    statements = StatementSet(statements=["sa"])
    verified = seval_verify(statements, "src", _chat("perhaps?"), SAMPLING)
    assert verified.verdicts == ["unsupported"]


@pytest.mark.parametrize("completion,expected", [
    ("supported", "supported"), ("Supported.", "supported"),
    ("yes", "supported"), ("true", "supported"),
    ("unsupported", "unsupported"), ("not supported", "unsupported"),
    ("No.", "unsupported"), ("false", "unsupported"),
    ("maybe", None),
])
def test_parse_verdict_surface_forms(completion, expected):
    assert parse_verdict(completion) == expected


def test_seval_score_ratios():
    assert seval_score(StatementSet(["a"] * 4, ["supported"] * 4)) == 1.0
    assert seval_score(StatementSet(["a"] * 4,
                                    ["supported"] * 3 + ["unsupported"])) == 0.75
    assert seval_score(StatementSet(["a"] * 5, ["unsupported"] * 5)) == 0.0


def test_seval_score_permutation_invariant():
    verdicts = ["supported", "unsupported", "supported", "unsupported"]
    base = seval_score(StatementSet(["s"] * 4, verdicts))
    for perm in itertools.permutations(verdicts):
        assert seval_score(StatementSet(["s"] * 4, list(perm))) == base


def test_seval_score_requires_verdicts():
    with pytest.raises(PreconditionError):
        seval_score(StatementSet(["a"]))


def test_statement_set_invariants():
    with pytest.raises(PreconditionError):
        StatementSet([""])
    with pytest.raises(PreconditionError):
        StatementSet(["a", "b"], ["supported"])
