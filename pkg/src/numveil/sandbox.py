"""Execution of generated code snippets behind a narrow capability surface.

Generated tools are self-contained arithmetic scripts; they get a restricted
builtin table, an import allowlist of pure computation modules, and nothing
else — no files, no network, no process control. Two executors implement the
same interface: an in-process one (default, used by tests and small runs) and
a client for external worker processes speaking line-delimited JSON on stdio.

The answer convention: the value bound to ``ans`` if the snippet defines it,
otherwise the value of a trailing bare expression, otherwise the value of the
last top-level assignment.
"""

from __future__ import annotations

import ast
import ctypes
import io
import json
import subprocess
import threading
from contextlib import redirect_stdout
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from typing import Protocol, Sequence

__all__ = [
    "ExecRequest",
    "ExecResult",
    "Sandbox",
    "InProcessSandbox",
    "StdioSandbox",
    "SAFE_IMPORTS",
]

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

_FINAL_NAME = "_final_expression_"


@dataclass(frozen=True)
class ExecRequest:
    id: str
    code: str
    timeout_ms: int = 5000
    memory_cap_mb: int = 256

    def __post_init__(self) -> None:
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be positive")
        if not self.code.strip():
            raise ValueError("code must not be blank")


@dataclass(frozen=True)
class ExecResult:
    id: str
    status: str  # ok | error | timeout
    answer: Decimal | None = None
    answer_repr: str = ""
    stdout: str = ""
    error: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"


class Sandbox(Protocol):
    def execute(self, request: ExecRequest) -> ExecResult: ...


def _guarded_import(name, globals=None, locals=None, fromlist=(), level=0):
    root = name.split(".")[0]
    if level != 0 or root not in SAFE_IMPORTS:
        raise ImportError(f"import of {name!r} is not allowed here")
    return __import__(name, globals, locals, fromlist, level)


def build_restricted_globals() -> dict:
    import builtins

    table = {name: getattr(builtins, name) for name in _SAFE_BUILTIN_NAMES}
    table["__import__"] = _guarded_import
    return {"__builtins__": table, "__name__": "__tool__"}


def coerce_decimal(value: object) -> Decimal:
    """Exact decimal form of a numeric result; raises ValueError otherwise."""
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


def _prepare(code: str) -> tuple[ast.Module, list[str]]:
    """Parse, capture a trailing bare expression, list assigned names in order."""
    tree = ast.parse(code)
    if tree.body and isinstance(tree.body[-1], ast.Expr):
        capture = ast.Assign(
            targets=[ast.Name(id=_FINAL_NAME, ctx=ast.Store())],
            value=tree.body[-1].value,
        )
        tree.body[-1] = ast.copy_location(capture, tree.body[-1])
        ast.fix_missing_locations(tree)

    assigned: list[str] = []
    for stmt in tree.body:
        targets: list[ast.expr] = []
        if isinstance(stmt, ast.Assign):
            targets = stmt.targets
        elif isinstance(stmt, (ast.AnnAssign, ast.AugAssign)):
            targets = [stmt.target]
        for target in targets:
            if isinstance(target, ast.Name) and target.id != _FINAL_NAME:
                assigned.append(target.id)
    return tree, assigned


def _pick_answer(namespace: dict, assigned: list[str]) -> object:
    if "ans" in namespace:
        return namespace["ans"]
    if namespace.get(_FINAL_NAME) is not None:
        return namespace[_FINAL_NAME]
    for name in reversed(assigned):
        if name in namespace:
            return namespace[name]
    raise ValueError("snippet produced no answer (no `ans`, expression, or assignment)")


def run_snippet(request: ExecRequest) -> ExecResult:
    """Execute one snippet in the current thread under the restricted table."""
    try:
        tree, assigned = _prepare(request.code)
        code_obj = compile(tree, "<tool>", "exec")
    except SyntaxError as exc:
        return ExecResult(request.id, "error", error=f"syntax error: {exc}")

    namespace = build_restricted_globals()
    captured = io.StringIO()
    try:
        with redirect_stdout(captured):
            exec(code_obj, namespace)
        raw = _pick_answer(namespace, assigned)
        answer = coerce_decimal(raw)
    except SystemExit:
        raise
    except BaseException as exc:  # noqa: BLE001 - report, never crash the host
        return ExecResult(
            request.id,
            "error",
            stdout=captured.getvalue(),
            error=f"{type(exc).__name__}: {exc}",
        )
    return ExecResult(
        request.id,
        "ok",
        answer=answer,
        answer_repr=repr(raw),
        stdout=captured.getvalue(),
    )


class InProcessSandbox:
    """Runs snippets on a worker thread with a wall-clock watchdog.

    A runaway snippet gets a SystemExit injected into its thread; pure-Python
    loops die promptly, and either way the call returns a timeout result
    within the budget.
    """

    def execute(self, request: ExecRequest) -> ExecResult:
        result: list[ExecResult] = []

        def worker() -> None:
            try:
                result.append(run_snippet(request))
            except SystemExit:
                pass

        thread = threading.Thread(target=worker, daemon=True)
        thread.start()
        thread.join(request.timeout_ms / 1000)
        if thread.is_alive():
            if thread.ident is not None:
                ctypes.pythonapi.PyThreadState_SetAsyncExc(
                    ctypes.c_long(thread.ident), ctypes.py_object(SystemExit)
                )
            thread.join(0.5)
            return ExecResult(
                request.id, "timeout", error=f"exceeded {request.timeout_ms} ms"
            )
        return result[0]


@dataclass
class _Worker:
    proc: subprocess.Popen

    def alive(self) -> bool:
        return self.proc.poll() is None

    def kill(self) -> None:
        if self.alive():
            self.proc.kill()
        self.proc.wait()


class StdioSandbox:
    """Client for external sandbox workers over line-delimited JSON.

    Each worker reads one request object per line on stdin and writes one
    response per line on stdout. Workers are reused across requests; a worker
    that times out or emits garbage is killed and replaced. A semaphore caps
    concurrent executions at the pool size.
    """

    def __init__(self, command: Sequence[str], pool_size: int = 1) -> None:
        if pool_size < 1:
            raise ValueError("pool_size must be at least 1")
        self.command = list(command)
        self._slots = threading.Semaphore(pool_size)
        self._lock = threading.Lock()
        self._idle: list[_Worker] = []

    def _spawn(self) -> _Worker:
        proc = subprocess.Popen(
            self.command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            text=True,
            bufsize=1,
        )
        return _Worker(proc)

    def _checkout(self) -> _Worker:
        with self._lock:
            while self._idle:
                worker = self._idle.pop()
                if worker.alive():
                    return worker
                worker.kill()
        return self._spawn()

    def _checkin(self, worker: _Worker) -> None:
        with self._lock:
            self._idle.append(worker)

    def execute(self, request: ExecRequest) -> ExecResult:
        payload = json.dumps(
            {
                "id": request.id,
                "code": request.code,
                "timeout_ms": request.timeout_ms,
                "memory_cap_mb": request.memory_cap_mb,
            }
        )
        # The worker enforces its own timeout; the client budget is a backstop
        # for a wedged process.
        budget = request.timeout_ms / 1000 * 2 + 5
        with self._slots:
            worker = self._checkout()
            line: list[str] = []

            def pump() -> None:
                assert worker.proc.stdin and worker.proc.stdout
                worker.proc.stdin.write(payload + "\n")
                worker.proc.stdin.flush()
                line.append(worker.proc.stdout.readline())

            thread = threading.Thread(target=pump, daemon=True)
            thread.start()
            thread.join(budget)
            if thread.is_alive() or not line or not line[0].strip():
                worker.kill()
                return ExecResult(
                    request.id, "timeout", error="worker unresponsive, killed"
                )
            try:
                obj = json.loads(line[0])
            except json.JSONDecodeError as exc:
                worker.kill()
                return ExecResult(request.id, "error", error=f"bad worker reply: {exc}")
            self._checkin(worker)
        answer = None
        if obj.get("answer") not in (None, ""):
            try:
                answer = Decimal(str(obj["answer"]))
            except InvalidOperation:
                return ExecResult(
                    request.id, "error", error=f"non-decimal answer {obj['answer']!r}"
                )
        return ExecResult(
            id=str(obj.get("id", request.id)),
            status=str(obj.get("status", "error")),
            answer=answer,
            answer_repr=str(obj.get("answer_repr", "")),
            stdout=str(obj.get("stdout", "")),
            error=str(obj.get("error", "")),
        )

    def close(self) -> None:
        with self._lock:
            workers, self._idle = self._idle, []
        for worker in workers:
            worker.kill()
