"""Answer reconstruction: run the remote tool on the original numbers.

The remote model never saw the real values, so its tool computes over
switched ones. Substituting each mapped literal with its original (inverse
lookup, identifiers untouched) and executing the result in the sandbox
recovers the true answer with no further model inference.
"""

from __future__ import annotations

from .answers import normalize_answer
from .numbers import NumberMapping, switch_text
from .sandbox import ExecRequest, ExecResult, Sandbox
from .toolsmith import ToolSolution

__all__ = ["substitute_literals", "reconstruct_answer"]


def substitute_literals(code: str, mapping: NumberMapping) -> str:
    """Replace every literal matching a mapping target with its original.

    All replacements happen against the source scan of ``code`` (inserted
    text is never re-scanned), every non-literal character is preserved, and
    digits inside identifiers are never touched.
    """
    return switch_text(code, mapping, direction="inverse", code=True)


def reconstruct_answer(
    tool: ToolSolution,
    mapping: NumberMapping,
    sandbox: Sandbox,
    *,
    request_id: str = "reconstruct",
    timeout_ms: int = 5000,
) -> ExecResult:
    """Execute the de-switched tool; the answer comes back at five decimals.

    Sandbox errors and timeouts pass through as-is: the caller treats them as
    a failed collaboration and falls back to the local majority answer.
    """
    restored = substitute_literals(tool.code, mapping)
    result = sandbox.execute(
        ExecRequest(id=request_id, code=restored, timeout_ms=timeout_ms)
    )
    if not result.ok or result.answer is None:
        return result
    return ExecResult(
        id=result.id,
        status=result.status,
        answer=normalize_answer(result.answer),
        answer_repr=result.answer_repr,
        stdout=result.stdout,
        error=result.error,
    )
