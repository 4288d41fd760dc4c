"""Model-backed scores: embedding greedy matching, conditional likelihood,
boolean-QA probability, and question-generation/answering overlap.

Each function is an exact formula over an abstract :class:`ModelBackend`;
determinism is entirely the backend's property.
"""

from __future__ import annotations

import re
from collections import Counter
from typing import Optional

import numpy as np

from .backends import ModelBackend
from .errors import DegenerateBackendError, ExtractionError, PreconditionError
from .prompts import render
from .records import DIMENSIONS, EvaluationRecord

_WORD_RE = re.compile(r"[a-z0-9]+")


def _simple_tokens(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


def bertscore(candidate: str, reference: str, backend: ModelBackend,
              idf_weights: Optional[dict[str, float]] = None
              ) -> tuple[float, float, float]:
    """Greedy token matching on normalized contextual embeddings.

    Recall aggregates, over reference tokens, the best cosine similarity to
    any candidate token (idf-weighted when weights are given); precision is
    the symmetric direction; f1 the harmonic mean.
    """
    cand_tokens = _simple_tokens(candidate)
    ref_tokens = _simple_tokens(reference)
    if not cand_tokens or not ref_tokens:
        raise PreconditionError("bertscore requires non-empty texts after tokenization")

    cand_emb = np.asarray(backend.embed(cand_tokens), dtype=float)
    ref_emb = np.asarray(backend.embed(ref_tokens), dtype=float)
    cand_emb = cand_emb / np.linalg.norm(cand_emb, axis=1, keepdims=True)
    ref_emb = ref_emb / np.linalg.norm(ref_emb, axis=1, keepdims=True)
    sim = ref_emb @ cand_emb.T  # [ref, cand]

    def weights(tokens: list[str]) -> np.ndarray:
        if idf_weights is None:
            return np.ones(len(tokens))
        return np.asarray([idf_weights.get(tok, 1.0) for tok in tokens])

    w_ref = weights(ref_tokens)
    w_cand = weights(cand_tokens)
    recall = float((sim.max(axis=1) * w_ref).sum() / w_ref.sum())
    precision = float((sim.max(axis=0) * w_cand).sum() / w_cand.sum())
    denom = precision + recall
    f1 = 2 * precision * recall / denom if denom else 0.0
    return recall, precision, f1


def bartscore(source: str, target: str, backend: ModelBackend,
              direction: str = "src_to_tgt") -> float:
    """Mean per-token conditional log-probability of one text given the other."""
    if not source or not target:
        raise PreconditionError("bartscore requires non-empty source and target")
    if direction not in ("src_to_tgt", "tgt_to_src"):
        raise PreconditionError(f"unknown direction {direction!r}")
    cond, out = (source, target) if direction == "src_to_tgt" else (target, source)
    total_logprob, n_tokens = backend.cond_logprob(cond, out)
    return total_logprob / n_tokens


def unieval(record: EvaluationRecord, dimension: str, backend: ModelBackend) -> float:
    """Boolean-QA score p_yes / (p_yes + p_no) for one quality dimension."""
    if dimension not in DIMENSIONS:
        raise PreconditionError(f"unknown dimension {dimension!r}")
    fields = {"summary": record.candidate_summary, "source": record.source_text}
    if dimension == "relevance":
        if not record.has_references:
            raise PreconditionError(
                f"record {record.record_id!r}: relevance needs at least one reference")
        fields["references"] = " ".join(record.references)
    prompt, _ = render(f"unieval_{dimension}", **fields)
    p_yes, p_no = backend.yes_no_probs(prompt)
    total = p_yes + p_no
    if total == 0:
        raise DegenerateBackendError(
            f"{backend.identity}: p_yes + p_no = 0 for dimension {dimension}")
    return p_yes / total


_UNANSWERABLE = "unanswerable"
_QA_LINE_RE = re.compile(r"^\s*\d+[.)]\s*(.+?)\s*\|\s*(.+?)\s*$")


def token_f1(expected: str, produced: str) -> float:
    """QA-style token overlap F1, lowercase and punctuation-stripped."""
    exp = Counter(_simple_tokens(expected))
    got = Counter(_simple_tokens(produced))
    if not exp and not got:
        return 1.0
    overlap = sum((exp & got).values())
    if overlap == 0:
        return 0.0
    precision = overlap / sum(got.values())
    recall = overlap / sum(exp.values())
    return 2 * precision * recall / (precision + recall)


def _generate_qa_pairs(text: str, backend: ModelBackend,
                       n_questions: int) -> list[tuple[str, str]]:
    prompt, _ = render("questeval_generate", text=text, n_questions=str(n_questions))
    raw = backend.generate(prompt)
    pairs = []
    for line in raw.splitlines():
        match = _QA_LINE_RE.match(line)
        if match:
            pairs.append((match.group(1), match.group(2)))
    if not pairs:
        raise ExtractionError("question generation produced no parseable question")
    return pairs[:n_questions]


def _answer(question: str, text: str, backend: ModelBackend) -> str:
    prompt, _ = render("questeval_answer", text=text, question=question)
    return backend.generate(prompt).strip()


def _leg_score(question_source: str, answer_source: str, backend: ModelBackend,
               n_questions: int) -> float:
    scores = []
    for question, expected in _generate_qa_pairs(question_source, backend, n_questions):
        produced = _answer(question, answer_source, backend)
        if produced.lower().strip(" .") == _UNANSWERABLE:
            scores.append(0.0)
        else:
            scores.append(token_f1(expected, produced))
    return sum(scores) / len(scores)


def questeval(record: EvaluationRecord, backend: ModelBackend,
              n_questions: int = 5) -> float:
    """QA-overlap score: mean of a precision leg (questions from the summary,
    answered from the source) and a recall leg (the reverse)."""
    if n_questions < 1:
        raise PreconditionError("n_questions must be >= 1")
    if not record.source_text or not record.candidate_summary:
        raise PreconditionError("questeval requires non-empty source and summary")
    precision_leg = _leg_score(record.candidate_summary, record.source_text,
                               backend, n_questions)
    recall_leg = _leg_score(record.source_text, record.candidate_summary,
                            backend, n_questions)
    return (precision_leg + recall_leg) / 2
