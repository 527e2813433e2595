"""HTTP facade over the cascade: one app, stateless JSON endpoints.

The app owns one set of role clients and one sandbox, built from the
configuration it was created with. Batch endpoints take whole payloads in
the request body; nothing is persisted server-side.
"""

from __future__ import annotations

import json

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .config import CascadeConfig
from .evaluation import judge_leakage, sweep, sweep_to_csv
from .filtering import (
    candidate_from_dict,
    candidate_to_dict,
    filter_training_set,
    make_chat_solver,
)
from .numbers import PolicyExhausted, build_mapping, extract_numbers, switch_text
from .pipeline import record_to_dict, run_pipeline
from .query import query_from_dict
from .runtime import build_clients, build_sandbox

__all__ = ["create_app"]


class QueryBody(BaseModel):
    id: str
    sentences: list[str | tuple[int, str]]
    question: str
    answer: str | float | None = None


class AnswerBody(BaseModel):
    query: QueryBody
    tau: float | None = None


class SwitchBody(BaseModel):
    text: str
    seed: int = 0


class JudgeBody(BaseModel):
    context_a: str
    context_b: str


class SweepBody(BaseModel):
    queries: list[QueryBody]
    taus: list[float]
    judge: bool = True


class FilterBody(BaseModel):
    candidates: list[dict]


def create_app(cfg: CascadeConfig | None = None) -> FastAPI:
    cfg = cfg or CascadeConfig()
    app = FastAPI(title="numveil")
    clients = build_clients(cfg)
    sandbox = build_sandbox(cfg.sandbox)

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.post("/answer")
    def answer(body: AnswerBody) -> dict:
        query = query_from_dict(body.query.model_dump())
        run_cfg = cfg if body.tau is None else cfg.with_tau(body.tau)
        record = run_pipeline(query, run_cfg, clients, sandbox)
        return record_to_dict(record)

    @app.post("/switch")
    def switch(body: SwitchBody) -> dict:
        values = [span.value for span in extract_numbers(body.text)]
        try:
            mapping = build_mapping(values, cfg.switch.with_seed(body.seed))
            switched = switch_text(body.text, mapping)
        except PolicyExhausted as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return {"switched": switched, "mapping": json.loads(mapping.to_json())}

    @app.post("/judge")
    def judge(body: JudgeBody) -> dict:
        verdict = judge_leakage(body.context_a, body.context_b, clients.judge)
        return {
            "leaked": verdict.leaked,
            "raw_reply": verdict.raw_reply,
            "unparseable": verdict.unparseable,
        }

    @app.post("/sweep")
    def run_sweep(body: SweepBody) -> dict:
        queries = [query_from_dict(q.model_dump()) for q in body.queries]
        points = sweep(
            queries, body.taus, cfg, clients, sandbox, judge=body.judge
        )
        return {
            "points": [
                {
                    "tau": p.tau,
                    "accuracy": p.accuracy,
                    "leakage": p.leakage,
                    "protection": p.protection,
                }
                for p in points
            ],
            "csv": sweep_to_csv(points),
        }

    @app.post("/filter")
    def run_filter(body: FilterBody) -> dict:
        try:
            candidates = [candidate_from_dict(c) for c in body.candidates]
        except (KeyError, TypeError, ValueError) as exc:
            detail = f"bad candidate: {type(exc).__name__}: {exc}"
            raise HTTPException(status_code=400, detail=detail) from exc
        solver = make_chat_solver(
            clients.local, sandbox, timeout_ms=cfg.sandbox.timeout_ms
        )
        outcomes, summary = filter_training_set(candidates, clients.judge, solver)
        rows = []
        for outcome in outcomes:
            row = candidate_to_dict(outcome.candidate)
            row["kept"] = outcome.kept
            row["reason"] = outcome.reason
            rows.append(row)
        return {"outcomes": rows, "summary": summary.to_dict()}

    return app
