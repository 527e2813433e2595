"""End-to-end behavior gates, one per core guarantee of the package."""

from __future__ import annotations

import os
import time
from collections import Counter
from decimal import Decimal
from random import Random

import pytest

from numveil.answers import normalize_answer
from numveil.clients import MockChatClient
from numveil.config import CascadeConfig, load_config
from numveil.evaluation import (
    aggregate,
    judge_leakage,
    run_baseline,
    sweep,
    sweep_to_csv,
    transmitted_payload_text,
)
from numveil.filtering import (
    TrainingCandidate,
    detect_numeric_conflicts,
    filter_training_set,
)
from numveil.numbers import (
    SwitchPolicy,
    ValueClass,
    build_mapping,
    extract_numbers,
    switch_text,
)
from numveil.pipeline import (
    RoleClients,
    record_to_dict,
    run_dataset,
    run_pipeline,
    write_records,
)
from numveil.query import ReasoningQuery
from numveil.reasoner import CandidateAnswer, compute_consistency
from numveil.reconstruct import reconstruct_answer
from numveil.runtime import build_clients, build_sandbox
from numveil.sandbox import InProcessSandbox
from numveil.simulate import demo_dataset
from numveil.synthesis import SynthesizedQuery
from numveil.toolsmith import ToolSolution, _literals_of


def _random_values(rng: Random) -> list[Decimal]:
    values: list[Decimal] = []
    for _ in range(rng.randint(1, 6)):
        kind = rng.random()
        if kind < 0.2:
            values.append(Decimal(rng.choice([1, 12, 28, 29, 30, 31])))
        elif kind < 0.45:
            values.append(Decimal(rng.randint(1990, 2030)))
        elif kind < 0.75:
            values.append(Decimal(rng.randint(-1_000_000, 1_000_000)))
        else:
            values.append(Decimal(rng.randint(-100_000, 100_000)) / 100)
    return values


def test_switch_invariants_hold_across_ten_thousand_value_sets():
    master = Random(20260819)
    started = time.monotonic()
    for i in range(10_000):
        rng = Random(master.getrandbits(64))
        values = _random_values(rng)
        policy = SwitchPolicy(seed=rng.getrandbits(32))
        mapping = build_mapping(values, policy)

        transformed = [e.transformed for e in mapping.entries]
        assert len(set(transformed)) == len(transformed)
        assert len(mapping.forward) == len(mapping.inverse) == len(mapping.entries)

        specials = [e for e in mapping.entries if e.value_class is ValueClass.SPECIAL]
        assert all(e.original == e.transformed for e in specials)

        years = sorted(
            (e for e in mapping.entries if e.value_class is ValueClass.YEAR_LIKE),
            key=lambda e: e.original,
        )
        for a, b in zip(years, years[1:]):
            assert b.transformed - a.transformed == b.original - a.original

        generals = sorted(
            (e for e in mapping.entries if e.value_class is ValueClass.GENERAL),
            key=lambda e: e.original,
        )
        for a, b in zip(generals, generals[1:]):
            assert a.transformed < b.transformed

        text = "Readings: " + " ".join(str(v) for v in values) + " ."
        switched = switch_text(text, mapping)
        restored = switch_text(switched, mapping, direction="inverse")
        assert restored == text
    assert time.monotonic() - started < 30.0


def test_year_trio_keeps_its_gaps_under_every_seed_and_reaches_a_plus_seven_shift():
    originals = [Decimal(2003), Decimal(2004), Decimal(2008)]

    for seed in range(500):
        mapping = build_mapping(originals, SwitchPolicy(seed=seed))
        out = [mapping.forward[v] for v in originals]
        assert out[1] - out[0] == 1
        assert out[2] - out[0] == 5

    target = [Decimal(2010), Decimal(2011), Decimal(2015)]
    for seed in range(5000):
        mapping = build_mapping(originals, SwitchPolicy(seed=seed))
        if [mapping.forward[v] for v in originals] == target:
            break
    else:
        pytest.fail("no seed shifted {2003, 2004, 2008} onto {2010, 2011, 2015}")


def _random_tool(rng: Random) -> tuple[str, float, object]:
    """A straight-line arithmetic snippet over switched values plus its oracle.

    Returns (switched code, direct evaluation over the original values,
    mapping). Division by zero and magnitude blowups are steered away from
    while generating, using the original-value arithmetic as the guide.
    """
    taken: set[int] = set()
    originals: list[int] = []
    while len(originals) < rng.randint(2, 4):
        v = rng.randint(3, 99_999)
        if v in (10, 100, 1000, 12, 28, 29, 30, 31) or 1990 <= v <= 2030:
            continue
        if v in taken:
            continue
        taken.add(v)
        originals.append(v)

    mapping = build_mapping([Decimal(v) for v in originals], SwitchPolicy(seed=rng.getrandbits(32)))

    lines = []
    oracle: dict[str, float] = {}
    for i, v in enumerate(originals):
        name = f"v{i}"
        lines.append(f"{name} = {mapping.forward[Decimal(v)]}")
        oracle[name] = v

    names = list(oracle)
    last = names[-1]
    for j in range(rng.randint(1, 4)):
        a, b = rng.choice(names), rng.choice(names)
        op = rng.choice("+-*/")
        if op == "/" and oracle[b] == 0:
            op = "+"
        value = eval(f"oracle[a] {op} oracle[b]")
        if abs(value) > 1e12:
            op = "-"
            value = oracle[a] - oracle[b]
        name = f"t{j}"
        lines.append(f"{name} = {a} {op} {b}")
        oracle[name] = value
        names.append(name)
        last = name
    lines.append(f"ans = {last}")
    return "\n".join(lines) + "\n", oracle[last], mapping


def test_reconstruction_matches_direct_evaluation_on_a_thousand_random_tools():
    rng = Random(7)
    sandbox = InProcessSandbox()
    for i in range(1000):
        code, expected, mapping = _random_tool(rng)
        tool = ToolSolution(
            code=code,
            dialect_tag="python",
            literals=_literals_of(code),
            model_id="m",
            raw_response=code,
        )
        result = reconstruct_answer(tool, mapping, sandbox, request_id=f"case-{i}")
        assert result.status == "ok", (code, result.error)
        assert result.answer == normalize_answer(expected), code


def test_consistency_matches_a_frequency_oracle_and_thresholds_saturate():
    rng = Random(99)
    for _ in range(1000):
        n = rng.randint(1, 9)
        values = [rng.choice([1, 2, 3, 4, None]) for _ in range(n)]
        candidates = [
            CandidateAnswer(i, "t", None, None if v is None else Decimal(v))
            for i, v in enumerate(values)
        ]
        report = compute_consistency(candidates)
        counts = Counter(v for v in values if v is not None)
        if counts:
            assert report.score == pytest.approx(counts.most_common(1)[0][1] / n)
        else:
            assert report.score == 0.0 and report.majority is None

    queries = demo_dataset(20)

    cfg = CascadeConfig(tau=0.0, deterministic_clock=True)
    clients = build_clients(cfg)
    run_dataset(queries, cfg, clients, build_sandbox(cfg.sandbox))
    assert len(clients.log.entries(0, "Remote")) == 0

    cfg = CascadeConfig(tau=1.0, deterministic_clock=True)
    clients = build_clients(cfg)
    records = run_dataset(queries, cfg, clients, build_sandbox(cfg.sandbox))
    assert all(record.transmitted for record in records)


def _assert_payload_clean(records, queries) -> None:
    texts = {q.id: [t for _, t in q.sentences] for q in queries}
    for record in records:
        payload = transmitted_payload_text(record)
        for sentence in texts[record.query_id]:
            assert sentence not in payload, record.query_id
        if record.mapping is None:
            assert payload == ""
            continue
        protected = record.mapping.originals(ValueClass.YEAR_LIKE, ValueClass.GENERAL)
        sent_values = {span.value for span in extract_numbers(payload)}
        assert sent_values & protected == set(), record.query_id


def test_remote_payloads_never_carry_original_sentences_or_values():
    queries = demo_dataset(10)

    cfg = CascadeConfig(deterministic_clock=True)
    clients = build_clients(cfg)
    records = run_dataset(queries, cfg, clients, build_sandbox(cfg.sandbox))
    assert {r.path for r in records} == {"local", "collab"}
    _assert_payload_clean(records, queries)

    base = build_clients(cfg)
    broken_shifter = RoleClients(
        local=base.local,
        shifter=MockChatClient(["no tags here"], base.log, cycle=True),
        remote=base.remote,
        judge=base.judge,
        log=base.log,
    )
    records = run_dataset(
        queries, cfg.with_tau(1.0), broken_shifter, build_sandbox(cfg.sandbox)
    )
    assert {r.path for r in records} == {"synthesis-fallback"}
    _assert_payload_clean(records, queries)
    assert len(base.log.entries(0, "Remote")) == 0

    base = build_clients(cfg)
    broken_remote = RoleClients(
        local=base.local,
        shifter=base.shifter,
        remote=MockChatClient(["```python\nans = 1 / 0\n```"], base.log, cycle=True),
        judge=base.judge,
        log=base.log,
    )
    records = run_dataset(
        queries, cfg.with_tau(1.0), broken_remote, build_sandbox(cfg.sandbox)
    )
    assert {r.path for r in records} == {"collab-failed-fallback"}
    assert all(r.transmitted for r in records)
    _assert_payload_clean(records, queries)

    vanilla_clients = build_clients(cfg)
    vanilla = run_baseline(
        "vanilla_cascade", queries, cfg, vanilla_clients, build_sandbox(cfg.sandbox)
    )
    violations = 0
    for record in vanilla:
        payload = transmitted_payload_text(record)
        if any(t in payload for _, t in next(q for q in queries if q.id == record.query_id).sentences):
            violations += 1
    assert violations > 0


def test_metrics_follow_their_definitions_and_sweep_covers_both_extremes():
    queries = demo_dataset(10)
    cfg = CascadeConfig(deterministic_clock=True)
    records = run_dataset(queries, cfg, build_clients(cfg), build_sandbox(cfg.sandbox))

    for remote_only in (0.25, 0.5, 0.8, 1.0):
        report = aggregate(records, remote_only_accuracy=remote_only)
        assert abs(report.normalized_accuracy - report.accuracy / remote_only) < 1e-9
        assert abs(report.protection_rate - (1 - report.leakage_rate)) < 1e-9

    assert judge_leakage("a", "b", MockChatClient(["Yes"])).leaked
    assert not judge_leakage("a", "b", MockChatClient(["No"])).leaked
    other = judge_leakage("a", "b", MockChatClient(["hard to tell"]))
    assert other.leaked and other.unparseable

    points = sweep(
        queries, [0.0, 1.0], cfg, build_clients(cfg), build_sandbox(cfg.sandbox)
    )
    low, high = points

    local_cfg = cfg.with_tau(0.0)
    local_records = run_dataset(
        queries, local_cfg, build_clients(local_cfg), build_sandbox(cfg.sandbox)
    )
    assert low.tau == 0.0
    assert low.leakage == 0.0
    assert low.accuracy == pytest.approx(aggregate(local_records).accuracy)

    remote_cfg = cfg.with_tau(1.0)
    remote_records = run_dataset(
        queries, remote_cfg, build_clients(remote_cfg), build_sandbox(cfg.sandbox)
    )
    assert high.tau == 1.0
    assert high.accuracy == pytest.approx(aggregate(remote_records).accuracy)

    lines = sweep_to_csv(points).strip().splitlines()
    assert lines[0] == "tau,accuracy,leakage,protection"
    for line in lines[1:]:
        tau, accuracy, leakage, protection = map(float, line.split(","))
        assert protection == pytest.approx(1 - leakage)


_FILTER_ORIGINAL = ReasoningQuery(
    id="orig",
    sentences=(
        (1, "Cargo tonnage was 840 in 2019 ."),
        (2, "Cargo tonnage climbed to 910 in 2020 ."),
    ),
    question="What is the growth rate of cargo tonnage from 2019 to 2020 ?",
)


def _filter_candidate(sentences, question) -> TrainingCandidate:
    rewrite = SynthesizedQuery(
        sentences=tuple(sentences), question=question, attempts=1, shifter_id="s"
    )
    return TrainingCandidate(original=_FILTER_ORIGINAL, rewrite=rewrite)


def test_training_filter_keeps_exactly_the_planted_candidates():
    good_question = "What is the growth rate of the reading from 2019 to 2020 ?"

    def good(noun: str) -> TrainingCandidate:
        return _filter_candidate(
            (
                f"{noun} was 840 in 2019 .",
                f"{noun} widened to 910 in 2020 .",
            ),
            good_question,
        )

    verbatim = _filter_candidate(
        tuple(t for _, t in _FILTER_ORIGINAL.sentences), _FILTER_ORIGINAL.question
    )
    conflicted = _filter_candidate(
        ("Beacon count for 2019 is 840 .", "Beacon count for 2019 is 910 ."),
        good_question,
    )
    inconsistent = _filter_candidate(
        ("Lantern count was 840 in 2019 .", "Lantern count widened to 910 in 2020 ."),
        good_question + " DIVERGES",
    )

    candidates = [
        good("Meadow span"),
        verbatim,
        good("Orchard yield"),
        conflicted,
        good("Quarry haul"),
        verbatim,
        good("Harbor draft"),
        inconsistent,
        good("Kiln load"),
        good("Trestle load"),
    ]
    judge = MockChatClient(["No", "Yes", "No", "No", "No", "Yes", "No", "No", "No", "No"])

    def solver(context: str, question: str) -> Decimal:
        return Decimal(2) if "DIVERGES" in question else Decimal(1)

    outcomes, summary = filter_training_set(candidates, judge, solver)
    assert [o.kept for o in outcomes] == [
        True, False, True, False, True, False, True, False, True, True,
    ]
    assert [o.reason for o in outcomes] == [
        None, "leakage", None, "conflict", None, "leakage", None, "consistency", None, None,
    ]
    assert summary.total == 10 and summary.kept == 6
    assert summary.dropped == {"leakage": 2, "conflict": 1, "consistency": 1}

    division_report = [
        "Total output of Global Manufacturing Division for 2014 is 184375 .",
        "Shipments were steady in the third quarter .",
        "Total output of Global Manufacturing Division for 2014 is 195839 .",
    ]
    assert detect_numeric_conflicts(division_report) == [(0, 2)]


def test_identical_seeds_produce_byte_identical_record_files(tmp_path):
    paths = []
    for name in ("first.jsonl", "second.jsonl"):
        cfg = CascadeConfig(global_seed=23, deterministic_clock=True)
        records = run_dataset(
            demo_dataset(10), cfg, build_clients(cfg), build_sandbox(cfg.sandbox)
        )
        assert {r.path for r in records} == {"local", "collab"}
        path = tmp_path / name
        write_records(records, path)
        paths.append(path)
    assert paths[0].read_bytes() == paths[1].read_bytes()


@pytest.mark.skipif(
    not os.environ.get("NUMVEIL_LIVE_SMOKE"),
    reason="live endpoints not configured; set NUMVEIL_LIVE_SMOKE=1 with a config",
)
def test_live_endpoints_answer_a_small_dataset():
    cfg = load_config(os.environ.get("NUMVEIL_CONFIG"))
    clients = build_clients(cfg)
    sandbox = build_sandbox(cfg.sandbox)
    records = [run_pipeline(q, cfg, clients, sandbox) for q in demo_dataset(5)]
    assert len(records) == 5
    for record in records:
        row = record_to_dict(record)
        assert row["id"] == record.query_id
        assert row["path"] in {"local", "collab", "collab-failed-fallback", "synthesis-fallback"}
        assert row["consistency"]["n"] == cfg.n_samples
        if row["answer"] is not None:
            Decimal(row["answer"])
