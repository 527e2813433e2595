"""Restricted snippet execution and the answer-picking convention."""

from __future__ import annotations

import time
from decimal import Decimal

import pytest

from numveil.sandbox import (
    ExecRequest,
    ExecResult,
    InProcessSandbox,
    SAFE_IMPORTS,
    coerce_decimal,
    run_snippet,
)


def run(code: str, timeout_ms: int = 5000) -> ExecResult:
    return run_snippet(ExecRequest(id="t", code=code, timeout_ms=timeout_ms))


class TestRequestValidation:
    def test_rejects_nonpositive_timeout(self):
        with pytest.raises(ValueError):
            ExecRequest(id="t", code="ans = 1", timeout_ms=0)

    def test_rejects_empty_code(self):
        with pytest.raises(ValueError):
            ExecRequest(id="t", code="   ", timeout_ms=100)


class TestAnswerConvention:
    def test_ans_variable_wins(self):
        result = run("x = 10\nans = 3\ny = 99")
        assert result.status == "ok"
        assert result.answer == Decimal(3)

    def test_trailing_bare_expression(self):
        result = run("a = 1\nb = 3\na + b")
        assert result.answer == Decimal(4)

    def test_last_assignment_is_the_fallback(self):
        result = run("first = 1\nsecond = 7")
        assert result.answer == Decimal(7)

    def test_growth_rate_snippet(self):
        code = (
            "value_2019 = 840\n"
            "value_2020 = 910\n"
            "ans = (value_2020 - value_2019) / value_2019\n"
        )
        result = run(code)
        assert result.status == "ok"
        assert result.answer == Decimal("0.08333333333333333")

    def test_stdout_is_captured(self):
        result = run("print('hi')\nans = 1")
        assert result.stdout == "hi\n"
        assert result.answer == Decimal(1)

    def test_answer_repr_preserves_the_raw_object(self):
        result = run("ans = 1/3")
        assert result.answer_repr == repr(1 / 3)


class TestIsolation:
    def test_disallowed_import_errors(self):
        result = run("import os\nans = 1")
        assert result.status == "error"
        assert "os" in result.error

    def test_open_is_not_a_name(self):
        result = run("ans = open('/etc/hostname').read()")
        assert result.status == "error"
        assert "open" in result.error

    def test_eval_is_not_a_name(self):
        result = run("ans = eval('1+1')")
        assert result.status == "error"

    def test_math_is_allowed(self):
        assert "math" in SAFE_IMPORTS
        result = run("import math\nans = math.sqrt(16)")
        assert result.answer == Decimal(4)

    def test_dunder_import_is_guarded(self):
        result = run("ans = __import__('socket').AF_INET")
        assert result.status == "error"


class TestFailureModes:
    def test_syntax_error(self):
        result = run("def broken(:\n  pass")
        assert result.status == "error"
        assert "syntax" in result.error.lower()

    def test_zero_division(self):
        result = run("ans = 1 / 0")
        assert result.status == "error"
        assert "ZeroDivisionError" in result.error

    def test_non_numeric_answer(self):
        result = run("ans = 'words'")
        assert result.status == "error"

    def test_no_answer_at_all(self):
        result = run("pass")
        assert result.status == "error"


class TestTimeout:
    def test_runaway_loop_times_out_within_budget(self):
        sandbox = InProcessSandbox()
        start = time.monotonic()
        result = sandbox.execute(
            ExecRequest(id="spin", code="while True:\n    pass", timeout_ms=300)
        )
        elapsed = time.monotonic() - start
        assert result.status == "timeout"
        assert elapsed < 2.0

    def test_fast_code_is_unaffected(self):
        sandbox = InProcessSandbox()
        result = sandbox.execute(ExecRequest(id="ok", code="ans = 2 + 2", timeout_ms=300))
        assert result.status == "ok"
        assert result.answer == Decimal(4)


class TestCoercion:
    def test_int_and_float_and_decimal(self):
        assert coerce_decimal(3) == Decimal(3)
        assert coerce_decimal(0.5) == Decimal("0.5")
        assert coerce_decimal(Decimal("1.25")) == Decimal("1.25")

    def test_bool_counts_as_its_integer(self):
        assert coerce_decimal(True) == Decimal(1)
        assert coerce_decimal(False) == Decimal(0)

    def test_numeric_strings_are_accepted(self):
        assert coerce_decimal(" 1.5 ") == Decimal("1.5")

    def test_none_is_rejected(self):
        with pytest.raises(ValueError):
            coerce_decimal(None)

    def test_nan_and_infinity_are_rejected(self):
        with pytest.raises(ValueError):
            coerce_decimal(float("nan"))
        with pytest.raises(ValueError):
            coerce_decimal(float("inf"))
        with pytest.raises(ValueError):
            coerce_decimal(Decimal("-Infinity"))
