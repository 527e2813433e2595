"""Context shortening: evidence citations fused with a BM25 ranker.

Local reasoning traces cite their supporting sentences as "[Sentence N]".
Those citations, a numeric-match fallback (sentences whose numbers all appear
in the trace's code), and the top BM25 hits for the question are unioned into
a shortened context that keeps the original sentence order and numbering.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .fences import first_fenced_block
from .numbers import extract_numbers
from .query import ReasoningQuery

__all__ = [
    "EvidenceTrace",
    "ShortenedContext",
    "EmptyContext",
    "extract_evidence_ids",
    "bm25_rank",
    "shorten_context",
]

_CITATION = re.compile(r"\[Sentence\s+(\d+)\]")
_TOKEN = re.compile(r"[a-z0-9]+")

BM25_K1 = 1.5
BM25_B = 0.75


class EmptyContext(Exception):
    """Shortening produced nothing despite a non-empty source context."""


@dataclass(frozen=True)
class EvidenceTrace:
    """One local reasoning run: raw text plus the sentence ids it cited."""

    run_index: int
    solution_text: str
    cited_ids: frozenset[int]


def extract_evidence_ids(trace_text: str, sentences: Sequence[tuple[int, str]]) -> frozenset[int]:
    """Sentence ids supported by a reasoning trace.

    Every "[Sentence N]" citation counts, restricted to valid ids. As a
    fallback for traces with wrong or missing ids, any sentence whose numeric
    values all appear in the trace's code block is included too.
    """
    valid = {i for i, _ in sentences}
    cited = {int(m.group(1)) for m in _CITATION.finditer(trace_text)}
    ids = cited & valid

    block = first_fenced_block(trace_text)
    if block is not None:
        code_values = {span.value for span in extract_numbers(block.body, code=True)}
        if code_values:
            for idx, text in sentences:
                values = {span.value for span in extract_numbers(text)}
                if values and values <= code_values:
                    ids.add(idx)
    return frozenset(ids)


def _tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def bm25_rank(question: str, sentences: Sequence[tuple[int, str]], k: int) -> list[int]:
    """Indices of the top-``k`` sentences by BM25 score for ``question``.

    Ties break toward the lower sentence index; ``k`` beyond the corpus size
    returns everything.
    """
    if k <= 0 or not sentences:
        return []
    docs = [(idx, _tokenize(text)) for idx, text in sentences]
    n_docs = len(docs)
    avg_len = sum(len(toks) for _, toks in docs) / n_docs
    doc_freq: Counter[str] = Counter()
    for _, toks in docs:
        doc_freq.update(set(toks))

    query_terms = _tokenize(question)
    scored = []
    for idx, toks in docs:
        counts = Counter(toks)
        score = 0.0
        for term in query_terms:
            tf = counts.get(term, 0)
            if not tf:
                continue
            df = doc_freq[term]
            idf = math.log(1 + (n_docs - df + 0.5) / (df + 0.5))
            norm = tf + BM25_K1 * (1 - BM25_B + BM25_B * len(toks) / avg_len)
            score += idf * tf * (BM25_K1 + 1) / norm
        if score > 0:
            scored.append((-score, idx))
    scored.sort()
    return [idx for _, idx in scored[:k]]


@dataclass(frozen=True)
class ShortenedContext:
    """Deduplicated evidence + lexical sentences in original order."""

    sentences: tuple[tuple[int, str], ...]
    sources: dict[int, str]

    def sentence_ids(self) -> frozenset[int]:
        return frozenset(i for i, _ in self.sentences)


def shorten_context(
    query: ReasoningQuery, traces: Sequence[EvidenceTrace], k: int
) -> ShortenedContext:
    """Union of all trace citations with the BM25 top-``k``, original order."""
    evidence_ids: set[int] = set()
    for trace in traces:
        evidence_ids |= trace.cited_ids
    evidence_ids &= query.sentence_ids()

    lexical_ids = set(bm25_rank(query.question, query.sentences, k))

    keep = evidence_ids | lexical_ids
    if not keep:
        if query.sentences:
            raise EmptyContext(f"no evidence or lexical hits for query {query.id!r}")
        return ShortenedContext(sentences=(), sources={})

    sentences = tuple((i, t) for i, t in query.sentences if i in keep)
    sources = {
        i: ("evidence" if i in evidence_ids else "lexical") for i, _ in sentences
    }
    return ShortenedContext(sentences=sentences, sources=sources)
