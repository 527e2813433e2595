"""The answer cascade: routing, collaboration, records, persistence."""

from __future__ import annotations

import hashlib
from decimal import Decimal

import pytest

from numveil.answers import answers_match
from numveil.clients import MockChatClient
from numveil.config import CascadeConfig
from numveil.pipeline import (
    AnswerRecord,
    Decision,
    RoleClients,
    derive_seed,
    read_records,
    record_from_dict,
    record_to_dict,
    route,
    run_dataset,
    run_pipeline,
    write_records,
)
from numveil.reasoner import ConsistencyReport
from numveil.runtime import build_clients, build_sandbox
from numveil.sandbox import InProcessSandbox
from numveil.simulate import demo_dataset


def report(score: float) -> ConsistencyReport:
    return ConsistencyReport(
        majority=Decimal("1.00000"), score=score, histogram=((Decimal("1.00000"), 1),), n=7
    )


class TestRouting:
    def test_collaborates_below_threshold(self):
        assert route(report(0.5), 0.8) is Decision.COLLABORATE

    def test_answers_locally_at_or_above_threshold(self):
        assert route(report(0.8), 0.8) is Decision.ANSWER_LOCALLY
        assert route(report(0.9), 0.8) is Decision.ANSWER_LOCALLY

    def test_tau_zero_never_collaborates(self):
        assert route(report(0.0), 0.0) is Decision.ANSWER_LOCALLY

    def test_tau_one_always_collaborates(self):
        assert route(report(1.0), 1.0) is Decision.COLLABORATE


class TestSeeds:
    def test_seed_is_stable_and_query_specific(self):
        a = derive_seed(0, "q-1")
        assert a == derive_seed(0, "q-1")
        assert a != derive_seed(0, "q-2")
        assert a != derive_seed(1, "q-1")

    def test_seed_matches_the_digest_prefix(self):
        digest = hashlib.sha256(b"42:some-query").digest()
        assert derive_seed(42, "some-query") == int.from_bytes(digest[:8], "big")


def simulated_run(queries, **overrides):
    cfg = CascadeConfig(deterministic_clock=True, **overrides)
    clients = build_clients(cfg)
    sandbox = build_sandbox(cfg.sandbox)
    return [run_pipeline(q, cfg, clients, sandbox) for q in queries], clients


class TestEndToEnd:
    def test_confident_queries_stay_local(self):
        queries = [q for q in demo_dataset(10) if "growth" in q.id][:2]
        records, clients = simulated_run(queries)
        assert all(r.path == "local" for r in records)
        assert all(r.transmitted == () for r in records)
        assert len(clients.log.entries(0, "Remote")) == 0
        for record in records:
            assert answers_match(record.final_answer, record.gold_answer)

    def test_unsure_queries_collaborate_and_recover_the_answer(self):
        queries = [q for q in demo_dataset(10) if "average" in q.id][:2]
        records, clients = simulated_run(queries)
        assert all(r.path == "collab" for r in records)
        assert all(r.transmitted for r in records)
        assert all(r.mapping is not None for r in records)
        assert all(r.tool_audit is not None and r.tool_audit.coverage_ok for r in records)
        for record in records:
            assert answers_match(record.final_answer, record.gold_answer)

    def test_consistency_is_recorded(self):
        queries = demo_dataset(5)
        records, _ = simulated_run(queries)
        for record in records:
            assert 0.0 <= record.consistency.score <= 1.0
            assert record.consistency.n == 7

    def test_run_dataset_matches_sequential_runs(self):
        queries = demo_dataset(4)
        cfg = CascadeConfig(deterministic_clock=True)
        records = run_dataset(queries, cfg, build_clients(cfg), build_sandbox(cfg.sandbox))
        sequential, _ = simulated_run(queries)
        assert [r.final_answer for r in records] == [r.final_answer for r in sequential]
        assert [r.path for r in records] == [r.path for r in sequential]


def unsure_query():
    return next(q for q in demo_dataset(10) if "ratio" in q.id)


def stubborn_clients(shifter_replies=None, remote_replies=None) -> RoleClients:
    """Simulated local model, scripted shifter and remote."""
    cfg = CascadeConfig()
    base = build_clients(cfg)
    log = base.log
    shifter = (
        MockChatClient(shifter_replies, log, cycle=True) if shifter_replies else base.shifter
    )
    remote = (
        MockChatClient(remote_replies, log, cycle=True) if remote_replies else base.remote
    )
    return RoleClients(
        local=base.local, shifter=shifter, remote=remote, judge=base.judge, log=log
    )


class TestFallbacks:
    def test_synthesis_exhaustion_transmits_nothing(self):
        clients = stubborn_clients(shifter_replies=["no tags, ever"])
        cfg = CascadeConfig(deterministic_clock=True)
        record = run_pipeline(unsure_query(), cfg, clients, InProcessSandbox())
        assert record.path == "synthesis-fallback"
        assert record.transmitted == ()
        assert len(clients.log.entries(0, "Remote")) == 0
        assert record.final_answer == record.consistency.majority
        assert any("rewrite failed" in note for note in record.notes)

    def test_blockless_remote_falls_back_to_majority(self):
        clients = stubborn_clients(remote_replies=["prose, no code"])
        cfg = CascadeConfig(deterministic_clock=True)
        record = run_pipeline(unsure_query(), cfg, clients, InProcessSandbox())
        assert record.path == "collab-failed-fallback"
        assert record.transmitted != ()
        assert record.final_answer == record.consistency.majority
        assert any("remote tool failed" in note for note in record.notes)

    def test_broken_remote_tool_falls_back_after_transmitting(self):
        clients = stubborn_clients(remote_replies=["```python\nans = 1 / 0\n```"])
        cfg = CascadeConfig(deterministic_clock=True)
        record = run_pipeline(unsure_query(), cfg, clients, InProcessSandbox())
        assert record.path == "collab-failed-fallback"
        assert record.transmitted != ()
        assert record.tool_audit is not None
        assert any("reconstruction error" in note for note in record.notes)


class TestRecordSerialization:
    def roundtrip(self, record: AnswerRecord) -> AnswerRecord:
        return record_from_dict(record_to_dict(record))

    def test_collab_record_roundtrips(self):
        records, _ = simulated_run([unsure_query()])
        back = self.roundtrip(records[0])
        original = records[0]
        assert back.query_id == original.query_id
        assert back.final_answer == original.final_answer
        assert back.path == original.path
        assert back.seed == original.seed
        assert back.consistency == original.consistency
        assert back.transmitted == original.transmitted
        assert back.tool_audit == original.tool_audit
        assert back.gold_answer == original.gold_answer
        assert back.context_text == original.context_text
        assert back.notes == original.notes
        assert back.mapping is not None
        assert back.mapping.forward == original.mapping.forward

    def test_local_record_roundtrips(self):
        records, _ = simulated_run([demo_dataset(1)[0]])
        back = self.roundtrip(records[0])
        assert back.path == "local"
        assert back.mapping is None
        assert back.tool_audit is None

    def test_jsonl_files_roundtrip(self, tmp_path):
        records, _ = simulated_run(demo_dataset(4))
        path = tmp_path / "records.jsonl"
        write_records(records, path)
        loaded = read_records(path)
        assert len(loaded) == len(records)
        for a, b in zip(records, loaded):
            assert record_to_dict(a) == record_to_dict(b)


class TestDeterminism:
    def test_same_seed_twice_is_byte_identical(self, tmp_path):
        paths = []
        for name in ("a.jsonl", "b.jsonl"):
            queries = demo_dataset(6)
            records, _ = simulated_run(queries, global_seed=13)
            path = tmp_path / name
            write_records(records, path)
            paths.append(path)
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_config_rejects_bad_tau(self):
        with pytest.raises(ValueError):
            CascadeConfig(tau=1.5)
