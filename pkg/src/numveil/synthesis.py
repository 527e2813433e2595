"""Topic-shifted query synthesis with structural validation.

The shifter model rewrites a query into an unrelated subject domain while
keeping numbers, sentence count, and logical shape intact. Nothing leaves
this module unvalidated: a rewrite is accepted only when the `<rewritten>`
tags parse, the sentence count matches, and the numeric multiset is exactly
preserved. Retries feed the violation list back to the model; exhaustion
raises FallbackSignal so the caller answers locally instead of transmitting
anything.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .clients import ChatClient, ChatRequest, Sampling
from .numbers import extract_numbers
from .prompts import build_rewriter_messages
from .query import ReasoningQuery

__all__ = [
    "SynthesizedQuery",
    "RewriteValidation",
    "FallbackSignal",
    "serialize_query",
    "parse_rewritten",
    "validate_rewrite",
    "synthesize",
]

_TAG = re.compile(r"<rewritten>(.*?)</rewritten>", re.DOTALL | re.IGNORECASE)
_SENTENCE_LABEL = re.compile(r"^\s*\[Sentence\s+\d+\]\s*:?\s*")
_WORD = re.compile(r"[a-z]+")

# A deliberately small stop list: enough to keep the noun-overlap signal from
# being dominated by scaffolding words; anything fancier belongs to the judge.
_STOP_WORDS = frozenset(
    """a an and are as at be by for from has have in is it its of on or that
    the to was were will with what how much many did do does year years ended
    december total sentence context question is""".split()
)


@dataclass(frozen=True)
class SynthesizedQuery:
    """A validated topic-shifted rewrite, positionally aligned to its source."""

    sentences: tuple[str, ...]
    question: str
    attempts: int
    shifter_id: str


@dataclass(frozen=True)
class RewriteValidation:
    tag_parse_ok: bool
    sentence_count_ok: bool
    numbers_preserved: bool
    noun_overlap_ratio: float
    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return self.tag_parse_ok and self.sentence_count_ok and self.numbers_preserved


class FallbackSignal(Exception):
    """Synthesis kept failing validation; answer locally, transmit nothing."""

    def __init__(self, attempts: int, last: RewriteValidation | None):
        self.attempts = attempts
        self.last = last
        detail = "; ".join(last.violations) if last else "no parseable output"
        super().__init__(f"rewrite failed after {attempts} attempts: {detail}")


def serialize_query(query: ReasoningQuery) -> str:
    return f"Context:\n{query.numbered_context()}\n\nQuestion: {query.question}"


def parse_rewritten(reply: str) -> tuple[tuple[str, ...], str] | None:
    """(sentences, question) from a shifter reply, or None when unparseable.

    Alignment is positional, so "[Sentence i]" labels echoed by the model are
    stripped; a "Context:" header line and blank lines are ignored.
    """
    m = _TAG.search(reply)
    if m is None:
        return None
    sentences: list[str] = []
    question: str | None = None
    for line in m.group(1).splitlines():
        line = line.strip()
        if not line or line.lower() == "context:":
            continue
        if line.lower().startswith("question:"):
            question = line[len("question:"):].strip()
            continue
        sentences.append(_SENTENCE_LABEL.sub("", line))
    if question is None:
        return None
    return tuple(sentences), question


def _numeric_multiset(texts: Sequence[str]) -> Counter:
    counter: Counter = Counter()
    for text in texts:
        counter.update(span.value for span in extract_numbers(text))
    return counter


def _content_words(texts: Sequence[str]) -> set[str]:
    words: set[str] = set()
    for text in texts:
        words.update(w for w in _WORD.findall(text.lower()) if w not in _STOP_WORDS)
    return words


def validate_rewrite(
    original: ReasoningQuery, candidate: SynthesizedQuery | None
) -> RewriteValidation:
    """Structural checks; noun overlap is advisory and never fails a rewrite."""
    if candidate is None:
        return RewriteValidation(
            tag_parse_ok=False,
            sentence_count_ok=False,
            numbers_preserved=False,
            noun_overlap_ratio=0.0,
            violations=("output had no parseable <rewritten> block",),
        )

    violations: list[str] = []
    count_ok = len(candidate.sentences) == len(original.sentences)
    if not count_ok:
        violations.append(
            f"sentence count changed: expected {len(original.sentences)}, "
            f"got {len(candidate.sentences)}"
        )

    original_numbers = _numeric_multiset(
        [t for _, t in original.sentences] + [original.question]
    )
    candidate_numbers = _numeric_multiset(
        list(candidate.sentences) + [candidate.question]
    )
    numbers_ok = original_numbers == candidate_numbers
    if not numbers_ok:
        missing = original_numbers - candidate_numbers
        added = candidate_numbers - original_numbers
        violations.append(
            f"numeric values changed: missing {sorted(missing.elements())}, "
            f"added {sorted(added.elements())}"
        )

    source_words = _content_words([t for _, t in original.sentences] + [original.question])
    shared = source_words & _content_words(
        list(candidate.sentences) + [candidate.question]
    )
    overlap = len(shared) / len(source_words) if source_words else 0.0

    return RewriteValidation(
        tag_parse_ok=True,
        sentence_count_ok=count_ok,
        numbers_preserved=numbers_ok,
        noun_overlap_ratio=overlap,
        violations=tuple(violations),
    )


def _feedback(validation: RewriteValidation) -> str:
    issues = "\n".join(f"- {v}" for v in validation.violations)
    return (
        "The rewrite was rejected for these reasons:\n"
        f"{issues}\n"
        "Produce a corrected rewrite. Keep every numerical value exactly as in "
        "the original, keep the same number of sentences, and output only the "
        "result within <rewritten> and </rewritten>."
    )


def synthesize(
    query: ReasoningQuery,
    shifter: ChatClient,
    max_attempts: int = 3,
    *,
    shifter_id: str = "shifter",
    sampling: Sampling = Sampling(),
    max_tokens: int = 2048,
) -> SynthesizedQuery:
    """Rewrite ``query`` via the shifter, validating and retrying.

    Raises FallbackSignal after ``max_attempts`` rejected rewrites; the
    caller must then answer locally. Original text goes only to the shifter
    role, never further.
    """
    serialized = serialize_query(query)
    history: list[tuple[str, str]] = []
    last_validation: RewriteValidation | None = None

    for attempt in range(1, max_attempts + 1):
        request = ChatRequest(
            messages=build_rewriter_messages(serialized, tuple(history)),
            sampling=sampling,
            max_tokens=max_tokens,
            role_tag="Shifter",
        )
        reply = shifter.chat(request).text
        parsed = parse_rewritten(reply)
        candidate = (
            SynthesizedQuery(
                sentences=parsed[0],
                question=parsed[1],
                attempts=attempt,
                shifter_id=shifter_id,
            )
            if parsed is not None
            else None
        )
        validation = validate_rewrite(query, candidate)
        last_validation = validation
        if candidate is not None and validation.ok:
            return candidate
        history.append((reply, _feedback(validation)))

    raise FallbackSignal(max_attempts, last_validation)
