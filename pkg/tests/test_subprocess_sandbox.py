"""Integration of the stdio sandbox client with a real external worker."""

from __future__ import annotations

import sys
import time
from concurrent.futures import ThreadPoolExecutor
from decimal import Decimal

import pytest

from numveil.sandbox import ExecRequest, StdioSandbox

pytest.importorskip("codecage")

WORKER_CMD = (sys.executable, "-m", "codecage.worker")


@pytest.fixture
def sandbox():
    box = StdioSandbox(WORKER_CMD, pool_size=2)
    yield box
    box.close()


def test_worker_answers_arithmetic(sandbox):
    result = sandbox.execute(ExecRequest(id="r-1", code="ans = (910 - 840) / 840"))
    assert result.ok
    assert result.id == "r-1"
    assert result.answer == Decimal("0.08333333333333333")


def test_worker_reports_errors(sandbox):
    result = sandbox.execute(ExecRequest(id="r-2", code="ans = 1 / 0"))
    assert result.status == "error"
    assert "ZeroDivisionError" in result.error


def test_worker_denies_system_access(sandbox):
    result = sandbox.execute(ExecRequest(id="r-3", code="import os\nans = 1"))
    assert result.status == "error"


def test_worker_timeout_stays_inside_the_backstop(sandbox):
    start = time.monotonic()
    result = sandbox.execute(
        ExecRequest(id="r-4", code="while True:\n    pass", timeout_ms=500)
    )
    elapsed = time.monotonic() - start
    assert result.status == "timeout"
    assert elapsed < 2.0


def test_worker_survives_reuse_after_failures(sandbox):
    sandbox.execute(ExecRequest(id="bad", code="ans = 1 / 0"))
    result = sandbox.execute(ExecRequest(id="good", code="ans = 2 + 2"))
    assert result.ok
    assert result.answer == Decimal("4")


def test_concurrent_requests_come_back_with_their_own_ids(sandbox):
    def one(k: int):
        return sandbox.execute(ExecRequest(id=f"c-{k}", code=f"ans = {k} * 11"))

    with ThreadPoolExecutor(max_workers=8) as pool:
        results = list(pool.map(one, range(20)))
    for k, result in enumerate(results):
        assert result.id == f"c-{k}"
        assert result.answer == Decimal(k * 11)
