"""Core query types and dataset loading.

A query is a numbered list of context sentences plus a question. Tables are
expected to be pre-flattened upstream into "[row] of [column] is [value]"
sentences, so everything downstream works over plain indexed text.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Iterable, Sequence

__all__ = ["ReasoningQuery", "load_dataset", "dump_dataset"]


@dataclass(frozen=True)
class ReasoningQuery:
    """One question over an indexed context.

    ``sentences`` is an ordered tuple of (index, text) pairs; indices must be
    unique and ascending but need not be contiguous (shortened contexts keep
    the original numbering).
    """

    id: str
    sentences: tuple[tuple[int, str], ...]
    question: str
    gold_answer: Decimal | None = None

    def __post_init__(self) -> None:
        indices = [i for i, _ in self.sentences]
        if any(a >= b for a, b in zip(indices, indices[1:])):
            raise ValueError(f"sentence indices not strictly ascending: {indices}")

    def sentence_ids(self) -> frozenset[int]:
        return frozenset(i for i, _ in self.sentences)

    def sentence_map(self) -> dict[int, str]:
        return dict(self.sentences)

    def numbered_context(self) -> str:
        return "\n".join(f"[Sentence {i}]: {t}" for i, t in self.sentences)

    def with_sentences(self, sentences: Sequence[tuple[int, str]]) -> "ReasoningQuery":
        return ReasoningQuery(
            id=self.id,
            sentences=tuple(sentences),
            question=self.question,
            gold_answer=self.gold_answer,
        )


def _parse_sentences(raw: object) -> tuple[tuple[int, str], ...]:
    if not isinstance(raw, list):
        raise ValueError("sentences must be a list")
    out: list[tuple[int, str]] = []
    for pos, item in enumerate(raw, 1):
        if isinstance(item, str):
            out.append((pos, item))
        elif isinstance(item, (list, tuple)) and len(item) == 2:
            out.append((int(item[0]), str(item[1])))
        else:
            raise ValueError(f"unsupported sentence entry: {item!r}")
    return tuple(out)


def query_from_dict(obj: dict) -> ReasoningQuery:
    gold: Decimal | None = None
    raw_answer = obj.get("answer")
    if raw_answer is not None and raw_answer != "":
        try:
            gold = Decimal(str(raw_answer))
        except InvalidOperation as exc:
            raise ValueError(f"unparseable gold answer {raw_answer!r}") from exc
    return ReasoningQuery(
        id=str(obj["id"]),
        sentences=_parse_sentences(obj["sentences"]),
        question=str(obj["question"]),
        gold_answer=gold,
    )


def query_to_dict(query: ReasoningQuery) -> dict:
    obj: dict = {
        "id": query.id,
        "sentences": [[i, t] for i, t in query.sentences],
        "question": query.question,
    }
    if query.gold_answer is not None:
        obj["answer"] = str(query.gold_answer)
    return obj


def load_dataset(path: str | Path) -> list[ReasoningQuery]:
    """Read a line-delimited JSON dataset of queries."""
    queries = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                queries.append(query_from_dict(json.loads(line)))
            except (ValueError, KeyError) as exc:
                raise ValueError(f"{path}:{line_no}: bad query record: {exc}") from exc
    return queries


def dump_dataset(queries: Iterable[ReasoningQuery], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for q in queries:
            fh.write(json.dumps(query_to_dict(q)) + "\n")
