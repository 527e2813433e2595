"""Isolated snippet worker: restricted execution behind a stdio protocol.

One JSON request per stdin line, one JSON response per stdout line, same id.
Snippets run with a whitelisted builtin surface and import set, a wall-clock
alarm, and an address-space cap; the answer is the value bound to ``ans`` or,
failing that, the last top-level assignment. The process exits cleanly on
EOF so a supervising pool can recycle workers by closing their stdin.
"""

from __future__ import annotations

import ast
import builtins
import io
import json
import resource
import signal
import sys
from contextlib import redirect_stdout
from decimal import Decimal, InvalidOperation
from fractions import Fraction

__all__ = ["SAFE_IMPORTS", "execute_snippet", "serve", "main"]

SAFE_IMPORTS = frozenset(
    {"math", "statistics", "itertools", "functools", "collections", "decimal", "fractions"}
)

_SAFE_BUILTIN_NAMES = (
    "abs", "all", "any", "bool", "dict", "divmod", "enumerate", "filter",
    "float", "frozenset", "int", "len", "list", "map", "max", "min", "pow",
    "print", "range", "repr", "reversed", "round", "set", "sorted", "str",
    "sum", "tuple", "zip", "ValueError", "ZeroDivisionError", "TypeError",
    "ArithmeticError", "Exception", "StopIteration",
)


class SnippetTimeout(Exception):
    """Raised by the alarm handler when a snippet outlives its budget."""


def _raise_timeout(signum, frame) -> None:
    raise SnippetTimeout


def _guarded_import(name, globals=None, locals=None, fromlist=(), level=0):
    if name.split(".")[0] not in SAFE_IMPORTS:
        raise ImportError(f"import of {name!r} is not allowed here")
    return builtins.__import__(name, globals, locals, fromlist, level)


def _restricted_globals() -> dict:
    table = {name: getattr(builtins, name) for name in _SAFE_BUILTIN_NAMES}
    table["__import__"] = _guarded_import
    return {"__builtins__": table}


def _assigned_names(tree: ast.Module) -> list[str]:
    names: list[str] = []
    for stmt in tree.body:
        targets: list[ast.expr] = []
        if isinstance(stmt, ast.Assign):
            targets = stmt.targets
        elif isinstance(stmt, (ast.AnnAssign, ast.AugAssign)):
            targets = [stmt.target]
        for target in targets:
            if isinstance(target, ast.Name):
                names.append(target.id)
    return names


def _pick_answer(namespace: dict, assigned: list[str]) -> object:
    if "ans" in namespace:
        return namespace["ans"]
    for name in reversed(assigned):
        if name in namespace:
            return namespace[name]
    raise ValueError("snippet produced no answer (no `ans` and no assignment)")


def _as_decimal(value: object) -> Decimal:
    out: Decimal
    if isinstance(value, bool):
        out = Decimal(int(value))
    elif isinstance(value, int):
        out = Decimal(value)
    elif isinstance(value, float):
        out = Decimal(repr(value))
    elif isinstance(value, Decimal):
        out = value
    elif isinstance(value, Fraction):
        out = Decimal(value.numerator) / Decimal(value.denominator)
    elif isinstance(value, str):
        try:
            out = Decimal(value.strip())
        except InvalidOperation:
            raise ValueError(f"non-numeric string result: {value!r}") from None
    else:
        raise ValueError(f"non-numeric result of type {type(value).__name__}")
    if not out.is_finite():
        raise ValueError(f"non-finite result: {out}")
    return out


def _cap_address_space(cap_mb: int) -> None:
    _, hard = resource.getrlimit(resource.RLIMIT_AS)
    resource.setrlimit(resource.RLIMIT_AS, (cap_mb * 1024 * 1024, hard))


def _uncap_address_space() -> None:
    _, hard = resource.getrlimit(resource.RLIMIT_AS)
    resource.setrlimit(resource.RLIMIT_AS, (hard, hard))


def _reply(rid: str, status: str, *, answer: Decimal | None = None,
           answer_repr: str = "", stdout: str = "", error: str = "") -> dict:
    return {
        "id": rid,
        "status": status,
        "answer": None if answer is None else str(answer),
        "answer_repr": answer_repr,
        "stdout": stdout,
        "error": error,
    }


def execute_snippet(request: dict) -> dict:
    """Run one request dict to completion; never raises, always answers."""
    rid = str(request.get("id", ""))
    code = request.get("code")
    try:
        timeout_ms = int(request.get("timeout_ms", 5000))
        cap_mb = int(request.get("memory_cap_mb", 256))
    except (TypeError, ValueError):
        return _reply(rid, "error", error="timeout_ms and memory_cap_mb must be integers")
    if not isinstance(code, str) or not code.strip():
        return _reply(rid, "error", error="code must be a non-empty string")
    if timeout_ms <= 0:
        return _reply(rid, "error", error="timeout_ms must be positive")
    if cap_mb <= 0:
        return _reply(rid, "error", error="memory_cap_mb must be positive")

    try:
        tree = ast.parse(code)
    except SyntaxError as exc:
        return _reply(rid, "error", error=f"syntax error: {exc}")
    assigned = _assigned_names(tree)

    namespace = _restricted_globals()
    captured = io.StringIO()
    previous_handler = signal.signal(signal.SIGALRM, _raise_timeout)
    _cap_address_space(cap_mb)
    signal.setitimer(signal.ITIMER_REAL, timeout_ms / 1000)
    try:
        with redirect_stdout(captured):
            exec(compile(tree, "<snippet>", "exec"), namespace)
        raw = _pick_answer(namespace, assigned)
        answer = _as_decimal(raw)
    except SnippetTimeout:
        return _reply(
            rid, "timeout", stdout=captured.getvalue(),
            error=f"exceeded {timeout_ms} ms",
        )
    except BaseException as exc:  # noqa: BLE001 - report, never crash the worker
        return _reply(
            rid, "error", stdout=captured.getvalue(),
            error=f"{type(exc).__name__}: {exc}",
        )
    finally:
        signal.setitimer(signal.ITIMER_REAL, 0.0)
        signal.signal(signal.SIGALRM, previous_handler)
        _uncap_address_space()
    return _reply(
        rid, "ok", answer=answer, answer_repr=repr(raw), stdout=captured.getvalue()
    )


def serve(stdin=None, stdout=None) -> None:
    """Answer requests line by line until stdin closes."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
        except json.JSONDecodeError as exc:
            response = _reply("", "error", error=f"bad request line: {exc}")
        else:
            if isinstance(request, dict):
                try:
                    response = execute_snippet(request)
                except BaseException as exc:  # noqa: BLE001 - keep the loop alive
                    response = _reply(
                        str(request.get("id", "")), "error",
                        error=f"worker fault: {type(exc).__name__}: {exc}",
                    )
            else:
                response = _reply("", "error", error="request must be a JSON object")
        stdout.write(json.dumps(response) + "\n")
        stdout.flush()


def main() -> None:
    serve()


if __name__ == "__main__":
    main()
