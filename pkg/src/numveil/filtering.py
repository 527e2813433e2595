"""Training-data quality filter for rewriter distillation.

Candidate rewrites are kept only when they pass three checks in order:
a leakage judgment (does the rewrite still use the original's information),
a conflict scan (do two rewritten sentences state different numbers for the
same masked template), and an answer-consistency verification (does a solver
reach the same answer on both versions). The first failing check drops the
candidate; a check that cannot complete drops it too.
"""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass, field, replace
from decimal import Decimal
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .answers import answers_match
from .clients import ChatClient, ChatRequest, Sampling
from .evaluation import judge_leakage
from .fences import first_fenced_block
from .numbers import extract_numbers
from .prompts import build_solver_messages
from .query import ReasoningQuery, query_from_dict, query_to_dict
from .sandbox import ExecRequest, Sandbox
from .synthesis import SynthesizedQuery

__all__ = [
    "SolverFailure",
    "TrainingCandidate",
    "FilterOutcome",
    "FilterSummary",
    "detect_numeric_conflicts",
    "verify_answer_consistency",
    "filter_training_set",
    "make_chat_solver",
    "candidate_from_dict",
    "candidate_to_dict",
    "load_candidates",
    "dump_outcomes",
]

PASS = "pass"
FAIL = "fail"
PENDING = "pending"

_WS = re.compile(r"\s+")

Solver = Callable[[str, str], Decimal]


class SolverFailure(Exception):
    """The consistency solver could not produce an answer."""


@dataclass(frozen=True)
class TrainingCandidate:
    original: ReasoningQuery
    rewrite: SynthesizedQuery
    verdicts: dict[str, str] = field(
        default_factory=lambda: {
            "leakage": PENDING,
            "conflict": PENDING,
            "consistency": PENDING,
        }
    )

    @property
    def kept(self) -> bool:
        return all(v == PASS for v in self.verdicts.values())


@dataclass(frozen=True)
class FilterOutcome:
    candidate: TrainingCandidate
    kept: bool
    reason: str | None


@dataclass(frozen=True)
class FilterSummary:
    total: int
    kept: int
    dropped: dict[str, int]

    def to_dict(self) -> dict:
        return {"total": self.total, "kept": self.kept, "dropped": self.dropped}


def _mask_numbers(sentence: str) -> tuple[str, tuple[Decimal, ...]]:
    spans = extract_numbers(sentence)
    pieces = []
    cursor = 0
    for span in spans:
        pieces.append(sentence[cursor : span.start])
        pieces.append("<num>")
        cursor = span.end
    pieces.append(sentence[cursor:])
    masked = _WS.sub(" ", "".join(pieces)).strip().lower()
    return masked, tuple(span.value for span in spans)


def detect_numeric_conflicts(sentences: Sequence[str]) -> list[tuple[int, int]]:
    """Index pairs whose sentences agree after masking numbers yet disagree on them.

    Exact duplicates (same template, same numbers) do not conflict; sentences
    about different subjects never match after masking.
    """
    masked = [_mask_numbers(s) for s in sentences]
    conflicts = []
    for i in range(len(masked)):
        template_i, payload_i = masked[i]
        for j in range(i + 1, len(masked)):
            template_j, payload_j = masked[j]
            if template_i == template_j and payload_i != payload_j:
                conflicts.append((i, j))
    return conflicts


def _rewrite_context(original: ReasoningQuery, rewrite: SynthesizedQuery) -> str:
    ids = [i for i, _ in original.sentences]
    if len(ids) == len(rewrite.sentences):
        numbered = zip(ids, rewrite.sentences)
    else:
        numbered = enumerate(rewrite.sentences, start=1)
    return "\n".join(f"[Sentence {i}]: {t}" for i, t in numbered)


def verify_answer_consistency(
    original: ReasoningQuery,
    rewrite: SynthesizedQuery,
    solver: Solver,
) -> str:
    """Solve both versions with the same solver and compare at five decimals.

    Returns pass, fail, or pending when the solver raises on either version.
    """
    try:
        answer_original = solver(original.numbered_context(), original.question)
        answer_rewrite = solver(_rewrite_context(original, rewrite), rewrite.question)
    except SolverFailure:
        return PENDING
    if answers_match(answer_rewrite, answer_original):
        return PASS
    return FAIL


def filter_training_set(
    candidates: Sequence[TrainingCandidate],
    judge: ChatClient,
    solver: Solver,
) -> tuple[list[FilterOutcome], FilterSummary]:
    """Leakage, then conflicts, then consistency; the first failure drops.

    A pending consistency verdict also drops the candidate: purity of the
    kept set matters more than its size.
    """
    outcomes = []
    dropped = {"leakage": 0, "conflict": 0, "consistency": 0}
    for candidate in candidates:
        verdicts = dict(candidate.verdicts)

        leak = judge_leakage(
            candidate.original.numbered_context(),
            _rewrite_context(candidate.original, candidate.rewrite)
            + f"\nQuestion: {candidate.rewrite.question}",
            judge,
        )
        verdicts["leakage"] = FAIL if leak.leaked else PASS
        if leak.leaked:
            dropped["leakage"] += 1
            outcomes.append(
                FilterOutcome(replace(candidate, verdicts=verdicts), False, "leakage")
            )
            continue

        conflicts = detect_numeric_conflicts(candidate.rewrite.sentences)
        verdicts["conflict"] = FAIL if conflicts else PASS
        if conflicts:
            dropped["conflict"] += 1
            outcomes.append(
                FilterOutcome(replace(candidate, verdicts=verdicts), False, "conflict")
            )
            continue

        verdicts["consistency"] = verify_answer_consistency(
            candidate.original, candidate.rewrite, solver
        )
        updated = replace(candidate, verdicts=verdicts)
        if verdicts["consistency"] != PASS:
            dropped["consistency"] += 1
            outcomes.append(FilterOutcome(updated, False, "consistency"))
            continue

        outcomes.append(FilterOutcome(updated, True, None))

    summary = FilterSummary(
        total=len(candidates),
        kept=sum(1 for o in outcomes if o.kept),
        dropped=dropped,
    )
    return outcomes, summary


def make_chat_solver(
    client: ChatClient,
    sandbox: Sandbox,
    *,
    max_tokens: int = 1024,
    timeout_ms: int = 5000,
) -> Solver:
    """A consistency solver backed by a chat model and the code sandbox."""
    counter = itertools.count()

    def solve(context: str, question: str) -> Decimal:
        reply = client.chat(
            ChatRequest(
                messages=build_solver_messages(context, question),
                sampling=Sampling.greedy(),
                max_tokens=max_tokens,
                role_tag="Local",
            )
        ).text
        block = first_fenced_block(reply)
        if block is None:
            raise SolverFailure("reply carried no code block")
        result = sandbox.execute(
            ExecRequest(
                id=f"filter/{next(counter)}", code=block.body, timeout_ms=timeout_ms
            )
        )
        if not result.ok or result.answer is None:
            raise SolverFailure(result.error or result.status)
        return result.answer

    return solve


def candidate_to_dict(candidate: TrainingCandidate) -> dict:
    return {
        "original": query_to_dict(candidate.original),
        "rewrite": {
            "sentences": list(candidate.rewrite.sentences),
            "question": candidate.rewrite.question,
            "attempts": candidate.rewrite.attempts,
            "shifter_id": candidate.rewrite.shifter_id,
        },
        "verdicts": dict(candidate.verdicts),
    }


def candidate_from_dict(obj: dict) -> TrainingCandidate:
    rewrite = SynthesizedQuery(
        sentences=tuple(obj["rewrite"]["sentences"]),
        question=obj["rewrite"]["question"],
        attempts=int(obj["rewrite"].get("attempts", 1)),
        shifter_id=obj["rewrite"].get("shifter_id", "shifter"),
    )
    candidate = TrainingCandidate(
        original=query_from_dict(obj["original"]), rewrite=rewrite
    )
    if "verdicts" in obj:
        candidate = replace(
            candidate, verdicts={**candidate.verdicts, **obj["verdicts"]}
        )
    return candidate


def load_candidates(path: str | Path) -> list[TrainingCandidate]:
    candidates = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                candidates.append(candidate_from_dict(json.loads(line)))
    return candidates


def dump_outcomes(
    outcomes: Iterable[FilterOutcome], summary: FilterSummary, path: str | Path
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for outcome in outcomes:
            row = candidate_to_dict(outcome.candidate)
            row["kept"] = outcome.kept
            row["reason"] = outcome.reason
            fh.write(json.dumps(row) + "\n")
        fh.write(json.dumps({"summary": summary.to_dict()}) + "\n")
