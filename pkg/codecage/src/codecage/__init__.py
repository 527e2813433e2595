"""Restricted Python snippet execution over a line-delimited JSON protocol."""

from __future__ import annotations

__all__ = ["SAFE_IMPORTS", "execute_snippet", "serve"]


def __getattr__(name: str):
    if name in __all__:
        from codecage import worker

        return getattr(worker, name)
    raise AttributeError(f"module 'codecage' has no attribute {name!r}")
