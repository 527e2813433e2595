"""Local program-of-thought sampling and self-consistency scoring.

The local model answers by writing code; each sampled trace has its first
fenced block executed in the sandbox, and the resulting values are voted on.
The consistency score S (top vote count over the number of samples, failures
included in the denominator) is the cascade's routing signal.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from decimal import Decimal
from typing import Sequence

from .answers import normalize_answer
from .clients import ChatClient, ChatRequest, Sampling
from .fences import first_fenced_block
from .prompts import build_solver_messages
from .query import ReasoningQuery
from .retrieval import EvidenceTrace, extract_evidence_ids
from .sandbox import ExecRequest, Sandbox

__all__ = [
    "CandidateAnswer",
    "ConsistencyReport",
    "sample_solutions",
    "compute_consistency",
]


@dataclass(frozen=True)
class CandidateAnswer:
    """One sampled local solution, executed (or the reason it wasn't)."""

    run_index: int
    trace: str
    code: str | None
    value: Decimal | None
    error: str | None = None


@dataclass(frozen=True)
class ConsistencyReport:
    majority: Decimal | None
    score: float
    histogram: tuple[tuple[Decimal, int], ...]
    n: int


def _solve_once(
    query: ReasoningQuery,
    run_index: int,
    client: ChatClient,
    sandbox: Sandbox,
    sampling: Sampling,
    max_tokens: int,
    timeout_ms: int,
) -> CandidateAnswer:
    request = ChatRequest(
        messages=build_solver_messages(query.numbered_context(), query.question),
        sampling=sampling,
        max_tokens=max_tokens,
        role_tag="Local",
    )
    trace = client.chat(request).text
    block = first_fenced_block(trace)
    if block is None:
        return CandidateAnswer(run_index, trace, None, None, error="no code block")
    result = sandbox.execute(
        ExecRequest(id=f"{query.id}/local/{run_index}", code=block.body, timeout_ms=timeout_ms)
    )
    if not result.ok:
        return CandidateAnswer(run_index, trace, block.body, None, error=result.error or result.status)
    return CandidateAnswer(run_index, trace, block.body, result.answer)


def sample_solutions(
    query: ReasoningQuery,
    n: int,
    client: ChatClient,
    sandbox: Sandbox,
    *,
    sampling: Sampling = Sampling(),
    max_tokens: int = 1024,
    timeout_ms: int = 5000,
    parallelism: int = 1,
) -> list[CandidateAnswer]:
    """Draw ``n`` independent local solutions; failures are recorded, not raised."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            futures = [
                pool.submit(
                    _solve_once, query, i, client, sandbox, sampling, max_tokens, timeout_ms
                )
                for i in range(n)
            ]
            return [f.result() for f in futures]
    return [
        _solve_once(query, i, client, sandbox, sampling, max_tokens, timeout_ms)
        for i in range(n)
    ]


def traces_of(query: ReasoningQuery, candidates: Sequence[CandidateAnswer]) -> list[EvidenceTrace]:
    """Evidence traces for context shortening, one per candidate."""
    return [
        EvidenceTrace(
            run_index=c.run_index,
            solution_text=c.trace,
            cited_ids=extract_evidence_ids(c.trace, query.sentences),
        )
        for c in candidates
    ]


def compute_consistency(candidates: Sequence[CandidateAnswer]) -> ConsistencyReport:
    """Majority vote over canonicalized values; S = top count / all candidates.

    Extraction failures stay in the denominator so an unreliable local model
    scores low. Ties break toward the value seen first in sample order.
    """
    n = len(candidates)
    counts: dict[Decimal, int] = {}
    order: list[Decimal] = []
    for cand in candidates:
        if cand.value is None:
            continue
        canonical = normalize_answer(cand.value)
        if canonical not in counts:
            counts[canonical] = 0
            order.append(canonical)
        counts[canonical] += 1

    if not counts or n == 0:
        return ConsistencyReport(majority=None, score=0.0, histogram=(), n=n)

    majority = max(order, key=lambda v: counts[v])  # max is stable: first wins ties
    return ConsistencyReport(
        majority=majority,
        score=counts[majority] / n,
        histogram=tuple((v, counts[v]) for v in order),
        n=n,
    )
