"""Run scoring: accuracy, leakage judging, baselines, threshold sweeps.

Accuracy is matched per record against its gold answer; normalized accuracy
divides by a remote-only reference accuracy. Leakage is judged by a model:
context A is the original input, context B everything the run transmitted to
the remote role, and the verdict is parsed from a literal yes/no reply. The
baseline runners implement the comparison protocols (local-only answering,
unprotected cascading, hint and example sharing) over the same record shape
so every run variant can be scored by the same code.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from typing import Mapping, Sequence

from .answers import answers_match
from .clients import ChatClient, ChatMessage, ChatRequest, Sampling
from .config import CascadeConfig
from .fences import first_fenced_block
from .pipeline import (
    AnswerRecord,
    Decision,
    LocalPhase,
    RoleClients,
    _serialize_calls,
    _shorten_with_fallback,
    collaborate,
    derive_seed,
    local_phase,
    route,
)
from .prompts import (
    CODE_SOLVER_SYSTEM,
    CODE_SOLVER_TASK,
    build_example_rephrase_messages,
    build_hint_describe_messages,
    build_hint_request_messages,
    build_judge_messages,
    build_solver_messages,
    build_solver_messages_with_hint,
    build_solver_messages_with_reference,
)
from .query import ReasoningQuery
from .reasoner import compute_consistency, sample_solutions, traces_of
from .sandbox import ExecRequest, Sandbox
from .synthesis import serialize_query

__all__ = [
    "LeakageVerdict",
    "Report",
    "SweepPoint",
    "judge_leakage",
    "judge_records",
    "transmitted_payload_text",
    "aggregate",
    "run_baseline",
    "sweep",
    "sweep_to_csv",
    "BASELINE_KINDS",
]

BASELINE_KINDS = ("single", "self_consistency", "vanilla_cascade", "hint", "example")


@dataclass(frozen=True)
class LeakageVerdict:
    leaked: bool
    raw_reply: str
    judge_id: str
    unparseable: bool = False


@dataclass(frozen=True)
class Report:
    accuracy: float
    normalized_accuracy: float | None
    leakage_rate: float
    protection_rate: float
    path_counts: dict[str, int]
    n_records: int

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "normalized_accuracy": self.normalized_accuracy,
            "leakage_rate": self.leakage_rate,
            "protection_rate": self.protection_rate,
            "path_counts": self.path_counts,
            "n_records": self.n_records,
        }


@dataclass(frozen=True)
class SweepPoint:
    tau: float
    accuracy: float
    leakage: float
    protection: float


def judge_leakage(
    original_context: str,
    transmitted: str,
    judge: ChatClient,
    *,
    judge_id: str = "judge",
    max_tokens: int = 8,
) -> LeakageVerdict:
    """Ask the judge whether the transmitted text uses the original's information.

    The reply is parsed by prefix: yes means leaked, no means clean, anything
    else counts as leaked (conservative) and is flagged unparseable.
    """
    request = ChatRequest(
        messages=build_judge_messages(original_context, transmitted),
        sampling=Sampling.greedy(),
        max_tokens=max_tokens,
        role_tag="Judge",
    )
    reply = judge.chat(request).text
    lowered = reply.strip().lower()
    if lowered.startswith("yes"):
        return LeakageVerdict(True, reply, judge_id)
    if lowered.startswith("no"):
        return LeakageVerdict(False, reply, judge_id)
    return LeakageVerdict(True, reply, judge_id, unparseable=True)


def transmitted_payload_text(record: AnswerRecord) -> str:
    """User-authored content of the record's remote-bound calls, concatenated.

    The fixed prompt scaffolding (system text, role labels) is excluded; the
    judged text is what varied because of this query.
    """
    parts = []
    for call in record.transmitted:
        for message in call["messages"]:
            if message["role"] == "user":
                parts.append(message["content"])
    return "\n".join(parts)


def judge_records(
    records: Sequence[AnswerRecord],
    judge: ChatClient,
    *,
    judge_id: str = "judge",
) -> dict[str, LeakageVerdict]:
    """One verdict per record that transmitted anything; local paths are skipped.

    Records with an empty transmission log never reach the judge and count as
    not leaked.
    """
    verdicts: dict[str, LeakageVerdict] = {}
    for record in records:
        payload = transmitted_payload_text(record)
        if not payload:
            continue
        verdicts[record.query_id] = judge_leakage(
            record.context_text, payload, judge, judge_id=judge_id
        )
    return verdicts


def aggregate(
    records: Sequence[AnswerRecord],
    *,
    remote_only_accuracy: float | None = None,
    leakage: Mapping[str, LeakageVerdict] | None = None,
) -> Report:
    """Fold records into one report; leakage denominator is all records."""
    n = len(records)
    if n == 0:
        return Report(0.0, None, 0.0, 1.0, {}, 0)

    correct = sum(
        1 for r in records if answers_match(r.final_answer, r.gold_answer)
    )
    accuracy = correct / n

    normalized = None
    if remote_only_accuracy is not None:
        if remote_only_accuracy <= 0:
            raise ValueError("remote_only_accuracy must be positive to normalize")
        normalized = accuracy / remote_only_accuracy

    leakage = leakage or {}
    leaked = sum(
        1
        for r in records
        if r.query_id in leakage and leakage[r.query_id].leaked
    )
    leakage_rate = leaked / n

    path_counts: dict[str, int] = {}
    for r in records:
        path_counts[r.path] = path_counts.get(r.path, 0) + 1

    return Report(
        accuracy=accuracy,
        normalized_accuracy=normalized,
        leakage_rate=leakage_rate,
        protection_rate=1 - leakage_rate,
        path_counts=path_counts,
        n_records=n,
    )


def _execute_tool_code(
    reply: str, sandbox: Sandbox, request_id: str, timeout_ms: int
) -> tuple[Decimal | None, str]:
    block = first_fenced_block(reply)
    if block is None:
        return None, "no code block"
    result = sandbox.execute(
        ExecRequest(id=request_id, code=block.body, timeout_ms=timeout_ms)
    )
    if not result.ok:
        return None, result.error or result.status
    return result.answer, ""


def _baseline_record(
    query: ReasoningQuery,
    phase: LocalPhase,
    answer: Decimal | None,
    path: str,
    cfg: CascadeConfig,
    transmitted: tuple[dict, ...] = (),
    notes: tuple[str, ...] = (),
) -> AnswerRecord:
    return AnswerRecord(
        query_id=query.id,
        final_answer=answer,
        path=path,
        consistency=phase.report,
        transmitted=transmitted,
        tool_audit=None,
        timings=dict(phase.timings),
        seed=derive_seed(cfg.global_seed, query.id),
        gold_answer=query.gold_answer,
        context_text=query.numbered_context(),
        notes=notes,
    )


def _serialize_remote_calls(clients: RoleClients, mark: int) -> tuple[dict, ...]:
    return _serialize_calls(clients.log.entries(mark, "Remote"))


def _vanilla_cascade_record(
    query: ReasoningQuery,
    cfg: CascadeConfig,
    clients: RoleClients,
    sandbox: Sandbox,
    phase: LocalPhase,
) -> AnswerRecord:
    """Unprotected escalation: the shortened original context goes out as-is."""
    shortened, notes = _shorten_with_fallback(
        query, traces_of(query, phase.candidates), cfg
    )
    context = "\n".join(f"[Sentence {i}]: {t}" for i, t in shortened.sentences)
    mark = clients.log.mark()
    request = ChatRequest(
        messages=build_solver_messages(context, query.question),
        sampling=Sampling.greedy(),
        max_tokens=cfg.remote.max_tokens,
        role_tag="Remote",
    )
    reply = clients.remote.chat(request).text
    transmitted = _serialize_remote_calls(clients, mark)
    answer, error = _execute_tool_code(
        reply, sandbox, f"{query.id}/vanilla", cfg.sandbox.timeout_ms
    )
    if answer is None:
        return _baseline_record(
            query,
            phase,
            phase.report.majority,
            "collab-failed-fallback",
            cfg,
            transmitted,
            notes + (f"vanilla remote failed: {error}",),
        )
    return _baseline_record(query, phase, answer, "collab", cfg, transmitted, notes)


def _hint_record(
    query: ReasoningQuery,
    cfg: CascadeConfig,
    clients: RoleClients,
    sandbox: Sandbox,
    phase: LocalPhase,
) -> AnswerRecord:
    description = clients.local.chat(
        ChatRequest(
            messages=build_hint_describe_messages(
                query.numbered_context(), query.question
            ),
            sampling=Sampling(cfg.local.temperature, cfg.local.top_p),
            max_tokens=256,
            role_tag="Local",
        )
    ).text
    mark = clients.log.mark()
    hint = clients.remote.chat(
        ChatRequest(
            messages=build_hint_request_messages(description),
            sampling=Sampling.greedy(),
            max_tokens=256,
            role_tag="Remote",
        )
    ).text
    transmitted = _serialize_remote_calls(clients, mark)
    reply = clients.local.chat(
        ChatRequest(
            messages=build_solver_messages_with_hint(
                query.numbered_context(), query.question, hint
            ),
            sampling=Sampling(cfg.local.temperature, cfg.local.top_p),
            max_tokens=cfg.local.max_tokens,
            role_tag="Local",
        )
    ).text
    answer, error = _execute_tool_code(
        reply, sandbox, f"{query.id}/hint", cfg.sandbox.timeout_ms
    )
    if answer is None:
        return _baseline_record(
            query,
            phase,
            phase.report.majority,
            "collab-failed-fallback",
            cfg,
            transmitted,
            (f"hint flow failed: {error}",),
        )
    return _baseline_record(query, phase, answer, "collab", cfg, transmitted)


def _example_record(
    query: ReasoningQuery,
    cfg: CascadeConfig,
    clients: RoleClients,
    sandbox: Sandbox,
    phase: LocalPhase,
) -> AnswerRecord:
    rephrased = clients.shifter.chat(
        ChatRequest(
            messages=build_example_rephrase_messages(serialize_query(query)),
            sampling=Sampling(cfg.shifter.temperature, cfg.shifter.top_p),
            max_tokens=cfg.shifter.max_tokens,
            role_tag="Shifter",
        )
    ).text
    mark = clients.log.mark()
    remote_reply = clients.remote.chat(
        ChatRequest(
            messages=(
                ChatMessage("system", f"{CODE_SOLVER_SYSTEM}\n\n{CODE_SOLVER_TASK}"),
                ChatMessage("user", rephrased),
            ),
            sampling=Sampling.greedy(),
            max_tokens=cfg.remote.max_tokens,
            role_tag="Remote",
        )
    ).text
    transmitted = _serialize_remote_calls(clients, mark)
    reply = clients.local.chat(
        ChatRequest(
            messages=build_solver_messages_with_reference(
                query.numbered_context(), query.question, remote_reply
            ),
            sampling=Sampling(cfg.local.temperature, cfg.local.top_p),
            max_tokens=cfg.local.max_tokens,
            role_tag="Local",
        )
    ).text
    answer, error = _execute_tool_code(
        reply, sandbox, f"{query.id}/example", cfg.sandbox.timeout_ms
    )
    if answer is None:
        return _baseline_record(
            query,
            phase,
            phase.report.majority,
            "collab-failed-fallback",
            cfg,
            transmitted,
            (f"example flow failed: {error}",),
        )
    return _baseline_record(query, phase, answer, "collab", cfg, transmitted)


def run_baseline(
    kind: str,
    queries: Sequence[ReasoningQuery],
    cfg: CascadeConfig,
    clients: RoleClients,
    sandbox: Sandbox,
) -> list[AnswerRecord]:
    """Comparison protocols over the same record shape as the main pipeline."""
    if kind not in BASELINE_KINDS:
        raise ValueError(f"unknown baseline {kind!r}; expected one of {BASELINE_KINDS}")

    records = []
    for query in queries:
        if kind == "single":
            candidates = sample_solutions(
                query,
                1,
                clients.local,
                sandbox,
                sampling=Sampling(cfg.local.temperature, cfg.local.top_p),
                max_tokens=cfg.local.max_tokens,
                timeout_ms=cfg.sandbox.timeout_ms,
            )
            phase = LocalPhase(candidates, compute_consistency(candidates))
            records.append(
                _baseline_record(query, phase, candidates[0].value, "local", cfg)
            )
            continue

        phase = local_phase(query, cfg, clients, sandbox)
        if kind == "self_consistency":
            records.append(
                _baseline_record(query, phase, phase.report.majority, "local", cfg)
            )
        elif kind == "vanilla_cascade":
            if route(phase.report, cfg.tau) is Decision.ANSWER_LOCALLY:
                records.append(
                    _baseline_record(query, phase, phase.report.majority, "local", cfg)
                )
            else:
                records.append(
                    _vanilla_cascade_record(query, cfg, clients, sandbox, phase)
                )
        elif kind == "hint":
            records.append(_hint_record(query, cfg, clients, sandbox, phase))
        else:
            records.append(_example_record(query, cfg, clients, sandbox, phase))
    return records


def sweep(
    queries: Sequence[ReasoningQuery],
    taus: Sequence[float],
    cfg: CascadeConfig,
    clients: RoleClients,
    sandbox: Sandbox,
    *,
    judge: bool = True,
) -> list[SweepPoint]:
    """One (tau, accuracy, leakage) point per threshold.

    Local sampling runs once per query and is shared across all thresholds;
    the collaboration path and its leakage verdict are computed lazily, also
    once per query.
    """
    phases = {q.id: local_phase(q, cfg, clients, sandbox) for q in queries}
    collab_cache: dict[str, AnswerRecord] = {}
    verdict_cache: dict[str, LeakageVerdict] = {}

    def collab_record(query: ReasoningQuery) -> AnswerRecord:
        if query.id not in collab_cache:
            record = collaborate(query, cfg, clients, sandbox, phases[query.id])
            collab_cache[query.id] = record
            if judge:
                payload = transmitted_payload_text(record)
                if payload:
                    verdict_cache[query.id] = judge_leakage(
                        record.context_text, payload, clients.judge
                    )
        return collab_cache[query.id]

    points = []
    for tau in taus:
        records = []
        for query in queries:
            phase = phases[query.id]
            if route(phase.report, tau) is Decision.ANSWER_LOCALLY:
                records.append(
                    _baseline_record(
                        query, phase, phase.report.majority, "local", cfg
                    )
                )
            else:
                records.append(collab_record(query))
        report = aggregate(records, leakage=verdict_cache)
        points.append(
            SweepPoint(
                tau=tau,
                accuracy=report.accuracy,
                leakage=report.leakage_rate,
                protection=report.protection_rate,
            )
        )
    return points


def sweep_to_csv(points: Sequence[SweepPoint]) -> str:
    lines = ["tau,accuracy,leakage,protection"]
    for p in points:
        lines.append(f"{p.tau},{p.accuracy},{p.leakage},{p.protection}")
    return "\n".join(lines) + "\n"
