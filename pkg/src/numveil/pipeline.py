"""Per-query cascade driver: local voting, routing, protected collaboration.

Each query runs through local self-consistency sampling first. A high score
answers locally and transmits nothing. A low score triggers the protected
collaboration path: shorten the context with the evidence the local runs
cited, topic-shift it, switch its numbers, send only that to the remote
model, and reconstruct the true answer from the returned tool. Every remote
transmission is captured verbatim in the answer record, which is the basis
for all privacy accounting downstream.

The two phases (local sampling, collaboration) are exposed separately so the
threshold sweep can reuse cached local samples across tau values.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .clients import CallLog, ChatClient, LoggedCall, Sampling, TransportError
from .config import CascadeConfig
from .numbers import NumberMapping, build_mapping, extract_numbers, switch_text
from .query import ReasoningQuery
from .reasoner import (
    CandidateAnswer,
    ConsistencyReport,
    compute_consistency,
    sample_solutions,
    traces_of,
)
from .reconstruct import reconstruct_answer
from .retrieval import EmptyContext, ShortenedContext, shorten_context
from .sandbox import Sandbox
from .synthesis import FallbackSignal, synthesize
from .toolsmith import MissingCode, ToolAudit, audit_tool, elicit_tool

__all__ = [
    "Decision",
    "RoleClients",
    "AnswerRecord",
    "LocalPhase",
    "route",
    "derive_seed",
    "local_phase",
    "collaborate",
    "run_pipeline",
    "run_dataset",
    "record_to_dict",
    "record_from_dict",
    "write_records",
    "read_records",
]


class Decision(Enum):
    ANSWER_LOCALLY = "local"
    COLLABORATE = "collaborate"


@dataclass(frozen=True)
class RoleClients:
    """The four model roles plus the shared transmission log."""

    local: ChatClient
    shifter: ChatClient
    remote: ChatClient
    judge: ChatClient
    log: CallLog


@dataclass(frozen=True)
class AnswerRecord:
    """Everything a single query run produced, audit payloads included."""

    query_id: str
    final_answer: Decimal | None
    path: str  # local | collab | collab-failed-fallback | synthesis-fallback
    consistency: ConsistencyReport
    transmitted: tuple[dict, ...]
    tool_audit: ToolAudit | None
    timings: dict[str, float]
    seed: int
    mapping: NumberMapping | None = None
    gold_answer: Decimal | None = None
    context_text: str = ""
    notes: tuple[str, ...] = ()


@dataclass
class LocalPhase:
    """Cached output of the sampling stage, reusable across tau values."""

    candidates: list[CandidateAnswer]
    report: ConsistencyReport
    timings: dict[str, float] = field(default_factory=dict)


def route(report: ConsistencyReport, tau: float) -> Decision:
    """Collaborate iff the score falls below tau, with saturated edges.

    tau at or below 0 always answers locally and tau at or above 1 always
    collaborates, regardless of the score; strict `S < tau` applies between.
    """
    if tau <= 0:
        return Decision.ANSWER_LOCALLY
    if tau >= 1:
        return Decision.COLLABORATE
    return Decision.COLLABORATE if report.score < tau else Decision.ANSWER_LOCALLY


def derive_seed(global_seed: int, query_id: str) -> int:
    digest = hashlib.sha256(f"{global_seed}:{query_id}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _make_clock(deterministic: bool) -> Callable[[], float]:
    if not deterministic:
        return time.perf_counter
    ticks = iter(range(1_000_000))
    return lambda: float(next(ticks))


def _serialize_calls(entries: Sequence[LoggedCall]) -> tuple[dict, ...]:
    out = []
    for entry in entries:
        out.append(
            {
                "role_tag": entry.role,
                "messages": [
                    {"role": m.role, "content": m.content}
                    for m in entry.request.messages
                ],
                "sampling": {
                    "temperature": entry.request.sampling.temperature,
                    "top_p": entry.request.sampling.top_p,
                },
                "max_tokens": entry.request.max_tokens,
            }
        )
    return tuple(out)


def _shorten_with_fallback(
    query: ReasoningQuery, traces, cfg: CascadeConfig
) -> tuple[ShortenedContext, tuple[str, ...]]:
    try:
        return shorten_context(query, traces, cfg.retrieval_k), ()
    except EmptyContext:
        head = query.sentences[: cfg.fallback_budget]
        shortened = ShortenedContext(
            sentences=head, sources={i: "lexical" for i, _ in head}
        )
        return shortened, ("context shortening found nothing; using leading sentences",)


def local_phase(
    query: ReasoningQuery,
    cfg: CascadeConfig,
    clients: RoleClients,
    sandbox: Sandbox,
    clock: Callable[[], float] | None = None,
) -> LocalPhase:
    clock = clock or _make_clock(cfg.deterministic_clock)
    t = clock()
    candidates = sample_solutions(
        query,
        cfg.n_samples,
        clients.local,
        sandbox,
        sampling=Sampling(cfg.local.temperature, cfg.local.top_p),
        max_tokens=cfg.local.max_tokens,
        timeout_ms=cfg.sandbox.timeout_ms,
    )
    timings = {"sample": clock() - t}
    return LocalPhase(candidates, compute_consistency(candidates), timings)


def _record(
    query: ReasoningQuery,
    phase: LocalPhase,
    answer: Decimal | None,
    path: str,
    *,
    seed: int,
    timings: dict[str, float],
    transmitted: tuple[dict, ...] = (),
    audit: ToolAudit | None = None,
    mapping: NumberMapping | None = None,
    notes: tuple[str, ...] = (),
) -> AnswerRecord:
    return AnswerRecord(
        query_id=query.id,
        final_answer=answer,
        path=path,
        consistency=phase.report,
        transmitted=transmitted,
        tool_audit=audit,
        timings=timings,
        seed=seed,
        mapping=mapping,
        gold_answer=query.gold_answer,
        context_text=query.numbered_context(),
        notes=notes,
    )


def collaborate(
    query: ReasoningQuery,
    cfg: CascadeConfig,
    clients: RoleClients,
    sandbox: Sandbox,
    phase: LocalPhase,
    clock: Callable[[], float] | None = None,
) -> AnswerRecord:
    """The protected collaboration path; falls back to the local majority."""
    clock = clock or _make_clock(cfg.deterministic_clock)
    seed = derive_seed(cfg.global_seed, query.id)
    timings = dict(phase.timings)
    notes: list[str] = []

    t = clock()
    shortened, shorten_notes = _shorten_with_fallback(
        query, traces_of(query, phase.candidates), cfg
    )
    notes.extend(shorten_notes)
    timings["shorten"] = clock() - t
    short_query = query.with_sentences(shortened.sentences)

    mark = clients.log.mark()
    t = clock()
    try:
        synth = synthesize(
            short_query,
            clients.shifter,
            cfg.max_rewrite_attempts,
            shifter_id=cfg.shifter.model or "shifter",
            sampling=Sampling(cfg.shifter.temperature, cfg.shifter.top_p),
            max_tokens=cfg.shifter.max_tokens,
        )
    except FallbackSignal as exc:
        notes.append(str(exc))
        timings["synthesize"] = clock() - t
        return _record(
            query,
            phase,
            phase.report.majority,
            "synthesis-fallback",
            seed=seed,
            timings=timings,
            transmitted=_serialize_calls(clients.log.entries(mark, "Remote")),
            notes=tuple(notes),
        )
    timings["synthesize"] = clock() - t

    t = clock()
    values = []
    for text in (*synth.sentences, synth.question):
        values.extend(span.value for span in extract_numbers(text))
    mapping = build_mapping(values, cfg.switch.with_seed(seed))
    switched_sentences = tuple(
        (idx, switch_text(text, mapping))
        for (idx, _), text in zip(short_query.sentences, synth.sentences)
    )
    switched_question = switch_text(synth.question, mapping)
    timings["switch"] = clock() - t

    t = clock()
    try:
        tool = elicit_tool(
            switched_sentences,
            switched_question,
            clients.remote,
            model_id=cfg.remote.model or "remote",
            max_tokens=cfg.remote.max_tokens,
        )
    except (MissingCode, TransportError) as exc:
        notes.append(f"remote tool failed: {exc}")
        timings["elicit"] = clock() - t
        return _record(
            query,
            phase,
            phase.report.majority,
            "collab-failed-fallback",
            seed=seed,
            timings=timings,
            transmitted=_serialize_calls(clients.log.entries(mark, "Remote")),
            mapping=mapping,
            notes=tuple(notes),
        )
    timings["elicit"] = clock() - t

    audit = audit_tool(tool, mapping)
    if not audit.coverage_ok:
        notes.append("tool audit: literal equal to an original value")

    t = clock()
    result = reconstruct_answer(
        tool,
        mapping,
        sandbox,
        request_id=f"{query.id}/reconstruct",
        timeout_ms=cfg.sandbox.timeout_ms,
    )
    timings["reconstruct"] = clock() - t
    transmitted = _serialize_calls(clients.log.entries(mark, "Remote"))

    if not result.ok:
        notes.append(f"reconstruction {result.status}: {result.error}")
        return _record(
            query,
            phase,
            phase.report.majority,
            "collab-failed-fallback",
            seed=seed,
            timings=timings,
            transmitted=transmitted,
            audit=audit,
            mapping=mapping,
            notes=tuple(notes),
        )
    return _record(
        query,
        phase,
        result.answer,
        "collab",
        seed=seed,
        timings=timings,
        transmitted=transmitted,
        audit=audit,
        mapping=mapping,
        notes=tuple(notes),
    )


def run_pipeline(
    query: ReasoningQuery,
    cfg: CascadeConfig,
    clients: RoleClients,
    sandbox: Sandbox,
) -> AnswerRecord:
    """Drive one query end to end; always returns a record, never raises."""
    clock = _make_clock(cfg.deterministic_clock)
    phase = local_phase(query, cfg, clients, sandbox, clock)
    if route(phase.report, cfg.tau) is Decision.ANSWER_LOCALLY:
        return _record(
            query,
            phase,
            phase.report.majority,
            "local",
            seed=derive_seed(cfg.global_seed, query.id),
            timings=dict(phase.timings),
        )
    return collaborate(query, cfg, clients, sandbox, phase, clock)


def run_dataset(
    queries: Sequence[ReasoningQuery],
    cfg: CascadeConfig,
    clients: RoleClients,
    sandbox: Sandbox,
) -> list[AnswerRecord]:
    """All queries in order; parallelism fans out whole queries."""
    if cfg.parallelism > 1:
        with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
            return list(
                pool.map(lambda q: run_pipeline(q, cfg, clients, sandbox), queries)
            )
    return [run_pipeline(q, cfg, clients, sandbox) for q in queries]


def record_to_dict(record: AnswerRecord) -> dict:
    return {
        "id": record.query_id,
        "answer": None if record.final_answer is None else str(record.final_answer),
        "path": record.path,
        "seed": record.seed,
        "gold_answer": (
            None if record.gold_answer is None else str(record.gold_answer)
        ),
        "consistency": {
            "majority": (
                None
                if record.consistency.majority is None
                else str(record.consistency.majority)
            ),
            "score": record.consistency.score,
            "n": record.consistency.n,
            "histogram": [[str(v), c] for v, c in record.consistency.histogram],
        },
        "transmitted": list(record.transmitted),
        "tool_audit": (
            None
            if record.tool_audit is None
            else {
                "mapped": [str(v) for v in record.tool_audit.mapped],
                "unmapped": [str(v) for v in record.tool_audit.unmapped],
                "coverage_ok": record.tool_audit.coverage_ok,
            }
        ),
        "mapping": (
            None if record.mapping is None else json.loads(record.mapping.to_json())
        ),
        "timings": record.timings,
        "context_text": record.context_text,
        "notes": list(record.notes),
    }


def record_from_dict(obj: dict) -> AnswerRecord:
    consistency = ConsistencyReport(
        majority=(
            None
            if obj["consistency"]["majority"] is None
            else Decimal(obj["consistency"]["majority"])
        ),
        score=float(obj["consistency"]["score"]),
        histogram=tuple(
            (Decimal(v), int(c)) for v, c in obj["consistency"]["histogram"]
        ),
        n=int(obj["consistency"]["n"]),
    )
    audit = None
    if obj.get("tool_audit") is not None:
        audit = ToolAudit(
            mapped=tuple(Decimal(v) for v in obj["tool_audit"]["mapped"]),
            unmapped=tuple(Decimal(v) for v in obj["tool_audit"]["unmapped"]),
            coverage_ok=bool(obj["tool_audit"]["coverage_ok"]),
        )
    mapping = None
    if obj.get("mapping") is not None:
        mapping = NumberMapping.from_json(json.dumps(obj["mapping"]))
    return AnswerRecord(
        query_id=obj["id"],
        final_answer=None if obj["answer"] is None else Decimal(obj["answer"]),
        path=obj["path"],
        consistency=consistency,
        transmitted=tuple(obj.get("transmitted", ())),
        tool_audit=audit,
        timings=dict(obj.get("timings", {})),
        seed=int(obj.get("seed", 0)),
        mapping=mapping,
        gold_answer=(
            None
            if obj.get("gold_answer") is None
            else Decimal(obj["gold_answer"])
        ),
        context_text=obj.get("context_text", ""),
        notes=tuple(obj.get("notes", ())),
    )


def write_records(records: Iterable[AnswerRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record_to_dict(record)) + "\n")


def read_records(path: str | Path) -> list[AnswerRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(record_from_dict(json.loads(line)))
    return records
