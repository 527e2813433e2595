"""Privacy-preserving collaboration gateway for numerical reasoning.

Answers locally when self-consistent, and otherwise sends a topic-shifted,
number-switched proxy of the query to a stronger remote model, rebuilding
the true answer locally from the returned code tool.
"""

from __future__ import annotations

from .answers import NotNumeric, answers_match, normalize_answer
from .clients import (
    CallLog,
    ChatMessage,
    ChatRequest,
    ChatResponse,
    HttpChatClient,
    MockChatClient,
    Sampling,
    TransportError,
)
from .config import CascadeConfig, ClientConfig, SandboxConfig, load_config
from .evaluation import (
    LeakageVerdict,
    Report,
    SweepPoint,
    aggregate,
    judge_leakage,
    judge_records,
    run_baseline,
    sweep,
    sweep_to_csv,
)
from .filtering import (
    TrainingCandidate,
    detect_numeric_conflicts,
    filter_training_set,
    verify_answer_consistency,
)
from .numbers import (
    MappingEntry,
    NumberFormat,
    NumberMapping,
    NumberSpan,
    PolicyExhausted,
    SwitchPolicy,
    ValueClass,
    build_mapping,
    classify_value,
    extract_numbers,
    render_number,
    switch_text,
    switch_texts,
)
from .pipeline import (
    AnswerRecord,
    Decision,
    RoleClients,
    derive_seed,
    read_records,
    route,
    run_dataset,
    run_pipeline,
    write_records,
)
from .query import (
    ReasoningQuery,
    dump_dataset,
    load_dataset,
    query_from_dict,
    query_to_dict,
)
from .reasoner import (
    CandidateAnswer,
    ConsistencyReport,
    compute_consistency,
    sample_solutions,
)
from .reconstruct import reconstruct_answer, substitute_literals
from .retrieval import (
    EmptyContext,
    EvidenceTrace,
    ShortenedContext,
    bm25_rank,
    extract_evidence_ids,
    shorten_context,
)
from .runtime import build_clients, build_sandbox
from .sandbox import ExecRequest, ExecResult, InProcessSandbox, StdioSandbox
from .service import create_app
from .simulate import SimulatedModel, demo_dataset
from .synthesis import (
    FallbackSignal,
    RewriteValidation,
    SynthesizedQuery,
    parse_rewritten,
    serialize_query,
    synthesize,
    validate_rewrite,
)
from .toolsmith import MissingCode, ToolAudit, ToolSolution, audit_tool, elicit_tool

__version__ = "0.1.0"
