"""Chat-model judge metrics: rubric scoring and statement-level verification.

Both metrics run entirely through a :class:`ChatBackend` with versioned
prompt templates; sampling parameters and template hashes are recorded so
any drift between runs is attributable.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from .backends import ChatBackend, SamplingParams
from .errors import ExtractionError, PreconditionError
from .prompts import render
from .records import DIMENSIONS, EvaluationRecord

log = logging.getLogger(__name__)


class ParseFailure(Exception):
    """Completion contained no usable score."""


_FRACTION_RE = re.compile(r"(?<![\w.])(-?\d+)\s*/\s*(\d+)(?![\w.])")
# trailing sentence punctuation is fine ("Score: 3."), decimals are not ("4.5")
_INT_RE = re.compile(r"(?<![\w./-])-?\d+(?!\.?\d)(?![\w/])")


def parse_score(completion: str, lo: int, hi: int) -> int:
    """Extract the first standalone integer in [lo, hi] from a completion.

    Tolerates prefixes ("Score: 4"), markdown decoration, and "n/hi"
    fraction forms. Raises :class:`ParseFailure` when the first integer
    found is out of range or none is present.
    """
    if lo >= hi:
        raise PreconditionError(f"parse_score requires lo < hi, got [{lo}, {hi}]")
    text = completion.replace("*", " ").replace("`", " ")
    fraction = _FRACTION_RE.search(text)
    if fraction and int(fraction.group(2)) == hi:
        value = int(fraction.group(1))
        if lo <= value <= hi:
            return value
        raise ParseFailure(f"score {value} outside [{lo}, {hi}]: {completion!r}")
    match = _INT_RE.search(text)
    if not match:
        raise ParseFailure(f"no integer found in {completion!r}")
    value = int(match.group(0))
    if not (lo <= value <= hi):
        raise ParseFailure(f"score {value} outside [{lo}, {hi}]: {completion!r}")
    return value


def geval_score(record: EvaluationRecord, dimension: str, backend: ChatBackend,
                sampling: SamplingParams) -> tuple[float, dict]:
    """Rubric-prompted 1-5 judgment, averaged over n_samples completions.

    Returns (score, details) where details carries parse outcomes and the
    prompt-template hash for provenance.
    """
    if dimension not in DIMENSIONS:
        raise PreconditionError(f"unknown dimension {dimension!r}")
    prompt, template_hash = render(f"geval_{dimension}",
                                   source=record.source_text,
                                   summary=record.candidate_summary)
    parsed: list[int] = []
    failures = 0
    for _ in range(sampling.n_samples):
        completion = backend.complete(prompt, sampling)
        try:
            parsed.append(parse_score(completion, 1, 5))
        except ParseFailure as exc:
            failures += 1
            log.warning("geval %s/%s: %s", record.record_id, dimension, exc)
    if not parsed:
        raise ExtractionError(
            f"record {record.record_id!r}, dimension {dimension}: "
            f"all {sampling.n_samples} completions unparseable")
    details = {"prompt_hash": template_hash, "n_parsed": len(parsed),
               "n_parse_failures": failures}
    return sum(parsed) / len(parsed), details


@dataclass
class StatementSet:
    """Atomic statements extracted from a summary, with optional verdicts."""

    statements: list[str]
    verdicts: list[str] = field(default_factory=list)

    def __post_init__(self):
        if any(not s for s in self.statements):
            raise PreconditionError("statements must be non-empty strings")
        if self.verdicts and len(self.verdicts) != len(self.statements):
            raise PreconditionError("verdicts must align one-to-one with statements")


_LIST_ITEM_RE = re.compile(r"^\s*(?:\d+[.)]|[-*•])\s*(.*\S)\s*$")


def seval_extract(summary: str, backend: ChatBackend,
                  sampling: SamplingParams) -> StatementSet:
    """Decompose a summary into atomic statements via a numbered-list prompt."""
    if not summary:
        raise PreconditionError("summary must be non-empty")
    prompt, _ = render("seval_extract", summary=summary)
    raw = backend.complete(prompt, sampling)
    statements: list[str] = []
    seen: set[str] = set()
    blanks = 0
    duplicates = 0
    for line in raw.splitlines():
        match = _LIST_ITEM_RE.match(line)
        if match is None:
            if line.strip() and re.match(r"^\s*(?:\d+[.)]|[-*•])\s*$", line):
                blanks += 1
            continue
        statement = match.group(1)
        if statement in seen:
            duplicates += 1
            continue
        seen.add(statement)
        statements.append(statement)
    if blanks:
        log.warning("statement extraction: %d blank list items skipped", blanks)
    if duplicates:
        log.warning("statement extraction: %d duplicate statements removed", duplicates)
    if not statements:
        raise ExtractionError(f"no statements extracted from completion {raw!r}")
    return StatementSet(statements=statements)


_SUPPORTED_RE = re.compile(r"\b(supported|yes|true)\b", re.IGNORECASE)
_UNSUPPORTED_RE = re.compile(r"\b(unsupported|not\s+supported|no|false)\b", re.IGNORECASE)


def parse_verdict(completion: str) -> str | None:
    """Map a free-form verdict to 'supported'/'unsupported'; None if unclear."""
    if _UNSUPPORTED_RE.search(completion):
        return "unsupported"
    if _SUPPORTED_RE.search(completion):
        return "supported"
    return None


def seval_verify(statements: StatementSet, source_text: str, backend: ChatBackend,
                 sampling: SamplingParams) -> StatementSet:
    """Judge each statement against the source, one backend call per statement.

    Unparseable verdicts fail closed: the statement is marked unsupported
    and the anomaly logged.
    """
    if not statements.statements:
        raise PreconditionError("no statements to verify")
    verdicts = []
    for statement in statements.statements:
        prompt, _ = render("seval_verify", source=source_text, statement=statement)
        completion = backend.complete(prompt, sampling)
        verdict = parse_verdict(completion)
        if verdict is None:
            log.warning("unparseable verdict %r for statement %r; "
                        "defaulting to unsupported", completion, statement)
            verdict = "unsupported"
        verdicts.append(verdict)
    return StatementSet(statements=list(statements.statements), verdicts=verdicts)


def seval_score(verified: StatementSet) -> float:
    """Fraction of statements supported by the source."""
    if not verified.verdicts:
        raise PreconditionError("seval_score requires assigned verdicts")
    supported = sum(1 for v in verified.verdicts if v == "supported")
    return supported / len(verified.verdicts)
