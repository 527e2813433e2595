"""Fenced code-block extraction from model replies."""

from __future__ import annotations

import re
from dataclasses import dataclass

__all__ = ["CodeBlock", "first_fenced_block"]

_FENCE = re.compile(r"```([^\n`]*)\n(.*?)```", re.DOTALL)


@dataclass(frozen=True)
class CodeBlock:
    info: str
    body: str


def first_fenced_block(text: str) -> CodeBlock | None:
    """The first triple-backtick block in ``text``, or None.

    The info string (the token after the opening fence, e.g. ``python``) is
    returned stripped; the body keeps its own newlines, minus the fences.
    """
    m = _FENCE.search(text)
    if m is None:
        return None
    return CodeBlock(info=m.group(1).strip(), body=m.group(2))
