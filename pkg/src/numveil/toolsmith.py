"""Remote tool elicitation and literal auditing.

The remote model sees only the switched, topic-shifted query and returns a
code tool solving it. This module sends that request (greedy decoding, same
solver prompt shape as local inference), pulls out the first fenced block,
and audits its numeric literals against the mapping: a literal equal to an
original pre-switch value is a leak-shaped anomaly worth flagging.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal

from .clients import ChatClient, ChatMessage, ChatRequest, Sampling
from .fences import first_fenced_block
from .numbers import NumberMapping, ValueClass, extract_numbers
from .prompts import build_solver_messages

__all__ = ["ToolSolution", "ToolAudit", "MissingCode", "elicit_tool", "audit_tool"]

EXPECTED_DIALECT = "python"

_RETRY_REMINDER = (
    "Your previous reply contained no code block. Reply with the Python "
    "solution enclosed in a code block that starts with the tag ```python "
    "and ends with the tag ```."
)


class MissingCode(Exception):
    """The remote reply carried no fenced code block, even after a retry."""


@dataclass(frozen=True)
class ToolSolution:
    """A remote-generated code tool plus its extractable numeric literals."""

    code: str
    dialect_tag: str
    literals: tuple[tuple[Decimal, int], ...]
    model_id: str
    raw_response: str


@dataclass(frozen=True)
class ToolAudit:
    mapped: tuple[Decimal, ...]
    unmapped: tuple[Decimal, ...]
    coverage_ok: bool


def _literals_of(code: str) -> tuple[tuple[Decimal, int], ...]:
    return tuple(
        (span.value, span.start) for span in extract_numbers(code, code=True)
    )


def elicit_tool(
    switched_sentences: tuple[tuple[int, str], ...],
    switched_question: str,
    remote: ChatClient,
    *,
    model_id: str = "remote",
    max_tokens: int = 1024,
) -> ToolSolution:
    """Ask the remote model for a code tool over the switched query.

    Greedy decoding; one retry with an explicit reminder if the reply has no
    fenced block, then MissingCode.
    """
    context = "\n".join(f"[Sentence {i}]: {t}" for i, t in switched_sentences)
    messages = build_solver_messages(context, switched_question)
    reply = ""
    for attempt in range(2):
        request = ChatRequest(
            messages=messages,
            sampling=Sampling.greedy(),
            max_tokens=max_tokens,
            role_tag="Remote",
        )
        reply = remote.chat(request).text
        block = first_fenced_block(reply)
        if block is not None:
            return ToolSolution(
                code=block.body,
                dialect_tag=block.info,
                literals=_literals_of(block.body),
                model_id=model_id,
                raw_response=reply,
            )
        messages = messages + (
            ChatMessage("assistant", reply),
            ChatMessage("user", _RETRY_REMINDER),
        )
    raise MissingCode(f"no fenced code block after retry; last reply: {reply[:200]!r}")


def audit_tool(tool: ToolSolution, mapping: NumberMapping) -> ToolAudit:
    """Split literals into mapped targets vs passthrough values.

    coverage_ok is a tripwire: it goes false when any literal equals an
    original YearLike or General value, which should be impossible for a
    well-switched query and indicates data leaked around the switch.
    """
    originals = mapping.originals(ValueClass.YEAR_LIKE, ValueClass.GENERAL)
    mapped, unmapped = [], []
    for value, _ in tool.literals:
        (mapped if value in mapping.inverse else unmapped).append(value)
    leak_shaped = any(value in originals for value, _ in tool.literals)
    return ToolAudit(
        mapped=tuple(mapped),
        unmapped=tuple(unmapped),
        coverage_ok=not leak_shaped,
    )
