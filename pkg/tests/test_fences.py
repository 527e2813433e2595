"""Fenced code block extraction."""

from __future__ import annotations

from numveil.fences import first_fenced_block


def test_first_block_wins():
    text = "intro\n```python\na = 1\n```\nmiddle\n```python\nb = 2\n```"
    block = first_fenced_block(text)
    assert block is not None
    assert block.info == "python"
    assert block.body == "a = 1\n"


def test_bare_fence_has_empty_info():
    block = first_fenced_block("```\nx = 3\n```")
    assert block.info == ""
    assert block.body == "x = 3\n"


def test_no_block_returns_none():
    assert first_fenced_block("just prose") is None


def test_unterminated_fence_returns_none():
    assert first_fenced_block("```python\nx = 1") is None


def test_multiline_body_preserved():
    body = "a = 1\nb = 2\nans = a + b\n"
    block = first_fenced_block(f"```python\n{body}```")
    assert block.body == body
