"""Deterministic rule-based stand-ins for the four model roles.

These let the whole system run offline: a template solver that reads the
numbered context and emits a fenced code tool, a noun-substituting rewriter,
a hint writer, and an overlap-based judge. One instance dispatches on the
request's system prompt and role tag, so the same object can back any role.
Replies depend only on the request (plus a counter for deliberately
inconsistent fallbacks), which keeps whole runs reproducible.

The module also generates a small synthetic dataset whose templates the
solver understands, so command-line demos and end-to-end tests have data
with known gold answers.
"""

from __future__ import annotations

import itertools
import random
import re
import threading
from decimal import Decimal
from typing import Sequence

from .clients import CallLog, ChatRequest, ChatResponse
from .numbers import extract_numbers
from .prompts import (
    EXAMPLE_REPHRASE_PROMPT,
    HINT_DESCRIBE_PROMPT,
    HINT_REMOTE_SYSTEM,
    JUDGE_PROMPT,
    REWRITER_SYSTEM,
)
from .query import ReasoningQuery

__all__ = [
    "ALL_SKILLS",
    "LOCAL_SKILLS",
    "SimulatedModel",
    "classify_question",
    "demo_dataset",
]

ALL_SKILLS = frozenset({"growth", "increase", "total", "average", "ratio"})
LOCAL_SKILLS = frozenset({"growth", "increase", "total"})

_YEAR_LO, _YEAR_HI = 1900, 2199

# Words that carry structure rather than topic. The rewriter keeps them and
# the judge ignores them, so the two stay consistent by construction.
_KEEP = frozenset(
    """a an and are as at be between but by did ended for from how in is it
    its most much of on or over per that the this to two was were what when
    which with within january february march april may june july august
    september october november december year years annual quarterly monthly
    figures planning purposes publishes total sum average mean ratio growth
    rate increase decrease change difference context question sentence what
    how many much across compared comparing""".split()
)

_SENTENCE_LINE = re.compile(r"\[Sentence\s+(\d+)\]:\s*(.*)")
_QUESTION_LINE = re.compile(r"^Question:\s*(.+)$", re.MULTILINE)
_WORD = re.compile(r"[A-Za-z]+")

_REPLACEMENT_POOL = (
    "lantern",
    "orchard",
    "tram",
    "aquifer",
    "kiln",
    "observatory",
    "ferry",
    "granary",
    "windmill",
    "quarry",
    "lagoon",
    "viaduct",
    "apiary",
    "citadel",
    "monorail",
    "pylon",
    "atrium",
    "causeway",
    "silo",
    "beacon",
)


def _parse_context_block(text: str) -> tuple[list[tuple[int, str]], str | None]:
    """Numbered sentences and the question, from a serialized query."""
    question = None
    match = None
    for match in _QUESTION_LINE.finditer(text):
        pass
    if match is not None:
        question = match.group(1).strip()
    sentences = []
    for line in text.splitlines():
        labeled = _SENTENCE_LINE.match(line.strip())
        if labeled:
            sentences.append((int(labeled.group(1)), labeled.group(2).strip()))
    return sentences, question


def classify_question(question: str) -> str | None:
    q = question.lower()
    if "growth rate" in q or "rate of growth" in q:
        return "growth"
    if "increase" in q or "decrease" in q or "change" in q:
        return "increase"
    if "total" in q or "sum" in q or "combined" in q:
        return "total"
    if "average" in q or "mean" in q:
        return "average"
    if "ratio" in q:
        return "ratio"
    return None


def _is_year(value: Decimal) -> bool:
    return value == value.to_integral_value() and _YEAR_LO <= value <= _YEAR_HI


def _sentence_facts(
    sentences: Sequence[tuple[int, str]],
) -> list[tuple[int, str, Decimal | None, Decimal | None]]:
    """Per sentence: index, text, its year if any, its first non-year value."""
    facts = []
    for idx, text in sentences:
        year = None
        value = None
        for span in extract_numbers(text):
            if year is None and _is_year(span.value):
                year = span.value
            elif value is None:
                value = span.value
        facts.append((idx, text, year, value))
    return facts


def _content_words(text: str) -> set[str]:
    return {
        w.lower()
        for w in _WORD.findall(text)
        if len(w) > 2 and w.lower() not in _KEEP
    }


def _overlap(question_words: set[str], text: str) -> int:
    return len(question_words & _content_words(text))


class SimulatedModel:
    """Offline stand-in for a chat model, scoped by its question skills.

    A model missing the skill a question needs replies with a different
    throwaway answer on every call, which drives self-consistency down and
    forces the cascade to escalate.
    """

    def __init__(
        self,
        skills: frozenset[str] = ALL_SKILLS,
        log: CallLog | None = None,
        name: str = "simulated",
    ) -> None:
        self.skills = skills
        self.log = log if log is not None else CallLog()
        self.name = name
        self._fallback = itertools.count()
        self._lock = threading.Lock()

    def chat(self, request: ChatRequest) -> ChatResponse:
        self.log.append(request.role_tag, request)
        system = request.messages[0].content if request.messages else ""
        user = request.messages[-1].content

        if system.startswith(HINT_DESCRIBE_PROMPT):
            return ChatResponse(self._describe(user))
        if system.startswith(HINT_REMOTE_SYSTEM):
            return ChatResponse(self._hint(user))
        if system.startswith(EXAMPLE_REPHRASE_PROMPT):
            return ChatResponse(self._rewrite_query(user))
        if system.startswith(REWRITER_SYSTEM):
            return ChatResponse(self._rewrite_tagged(request))
        if user.startswith(JUDGE_PROMPT):
            return ChatResponse(self._judge(user))
        return ChatResponse(self._solve(user))

    # Solver role

    def _solve(self, user: str) -> str:
        sentences, question = _parse_context_block(user)
        kind = classify_question(question or "")
        if kind is None or kind not in self.skills:
            return self._flail(sentences)
        facts = _sentence_facts(sentences)
        with_value = [f for f in facts if f[3] is not None]
        if kind == "total":
            chosen = self._rank(question or "", with_value)[:2]
            if len(chosen) < 2:
                return self._flail(sentences)
            (i, _, _, a), (j, _, _, b) = sorted(chosen)
            return _render_tool(
                (i, j),
                (("first_amount", a), ("second_amount", b)),
                "The total is the sum of the two amounts",
                "first_amount + second_amount",
            )

        dated = [f for f in facts if f[2] is not None and f[3] is not None]
        pair = self._pick_dated_pair(question or "", dated)
        if pair is None:
            return self._flail(sentences)
        (i, _, y1, a), (j, _, y2, b) = pair
        va, vb = f"value_{int(y1)}", f"value_{int(y2)}"
        assigns = ((va, a), (vb, b))
        if kind == "growth":
            return _render_tool(
                (i, j),
                assigns,
                "Growth rate is the later value against the earlier one",
                f"({vb} - {va}) / {va}",
            )
        if kind == "increase":
            return _render_tool(
                (i, j),
                assigns,
                "The change is the later value minus the earlier one",
                f"{vb} - {va}",
            )
        if kind == "average":
            return _render_tool(
                (i, j),
                assigns,
                "The average splits the sum of both values",
                f"({va} + {vb}) / 2",
            )
        return _render_tool(
            (i, j),
            assigns,
            "The ratio divides the first named value by the second",
            f"{va} / {vb}",
        )

    def _rank(self, question: str, facts: list) -> list:
        words = _content_words(question)
        return sorted(facts, key=lambda f: (-_overlap(words, f[1]), f[0]))

    def _pick_dated_pair(self, question: str, dated: list):
        """Two dated sentences, ordered to match the question's year order."""
        if len(dated) < 2:
            return None
        q_years = [s.value for s in extract_numbers(question) if _is_year(s.value)]
        if len(q_years) >= 2:
            by_year = {f[2]: f for f in dated}
            first, second = by_year.get(q_years[0]), by_year.get(q_years[1])
            if first is not None and second is not None and first is not second:
                return first, second
        ranked = self._rank(question, dated)[:2]
        return tuple(sorted(ranked, key=lambda f: f[2]))

    def _flail(self, sentences: Sequence[tuple[int, str]]) -> str:
        """A syntactically fine tool with a fresh answer every call."""
        base = Decimal(0)
        for _, text in sentences:
            spans = extract_numbers(text)
            if spans:
                base = spans[0].value
                break
        with self._lock:
            k = next(self._fallback)
        return (
            "```python\n"
            "# Step 1, [logical step] No applicable rule; guessing\n"
            f"ans = {base} + {k}\n"
            "```"
        )

    # Rewriter role

    def _shift_words(self, text: str, table: dict[str, str]) -> str:
        def swap(match: re.Match) -> str:
            word = match.group(0)
            key = word.lower()
            if len(word) <= 2 or key in _KEEP:
                return word
            if key not in table:
                slot = len(table)
                pool = _REPLACEMENT_POOL
                replacement = pool[slot % len(pool)]
                if slot >= len(pool):
                    replacement = f"{replacement}{slot // len(pool)}"
                table[key] = replacement
            replacement = table[key]
            return replacement.capitalize() if word[0].isupper() else replacement

        return _WORD.sub(swap, text)

    def _rewrite_query(self, user: str) -> str:
        sentences, question = _parse_context_block(user)
        table: dict[str, str] = {}
        lines = ["Context:"]
        for idx, text in sentences:
            lines.append(f"[Sentence {idx}]: {self._shift_words(text, table)}")
        lines.append("")
        lines.append(f"Question: {self._shift_words(question or '', table)}")
        return "\n".join(lines)

    def _rewrite_tagged(self, request: ChatRequest) -> str:
        query_text = ""
        for message in reversed(request.messages):
            if message.role == "user" and message.content.startswith("Context:"):
                query_text = message.content
                break
        return f"<rewritten>\n{self._rewrite_query(query_text)}\n</rewritten>"

    # Hint roles

    def _describe(self, user: str) -> str:
        _, question = _parse_context_block(user)
        kind = classify_question(question or "") or "numeric"
        return (
            f"This is a {kind} question over figures reported in a short "
            "context; the task is to pick the relevant figures and combine "
            "them arithmetically."
        )

    def _hint(self, description: str) -> str:
        for kind in sorted(ALL_SKILLS):
            if kind in description.lower():
                return (
                    f"Identify the two figures the question refers to, then "
                    f"apply the {kind} operation to them in the stated order."
                )
        return "Identify the relevant figures, then combine them as asked."

    # Judge role

    def _judge(self, user: str) -> str:
        _, _, rest = user.partition("Context A:\n")
        a_text, _, b_text = rest.partition("\n\nContext B:\n")
        a_words = _content_words(a_text)
        if not a_words:
            return "No"
        shared = len(a_words & _content_words(b_text))
        return "Yes" if shared / len(a_words) >= 1 / 3 else "No"


def _render_tool(
    evidence: tuple[int, int],
    assigns: tuple[tuple[str, Decimal], ...],
    step_note: str,
    formula: str,
) -> str:
    cites = ", ".join(f"[Sentence {i}]" for i in evidence)
    lines = [
        "```python",
        "# Step 1, [retrieval step] Retrieve the cited figures",
        f"# evidence from the original context: {cites}",
    ]
    for name, value in assigns:
        lines.append(f"{name} = {value}")
    lines.append(f"# Step 2, [logical step] {step_note}")
    lines.append(f"ans = {formula}")
    lines.append("```")
    return "\n".join(lines)


_ORGS = (
    "harbor authority",
    "mill cooperative",
    "survey institute",
    "foundry group",
    "archive trust",
)
_METRICS = (
    "Cargo tonnage",
    "Grain throughput",
    "Membership dues",
    "Casting output",
    "Record accessions",
)

# Values and years that appear in the fixed demonstration prompts; generated
# data avoids them so transmitted payloads stay attributable.
_RESERVED_VALUES = frozenset(
    Decimal(v) for v in ("840", "910", "70", "64", "80", "0.25", "350", "125", "475")
)
_RESERVED_YEARS = frozenset({2019, 2020, 2021, 2022})


def _draw_value(rng: random.Random) -> int:
    while True:
        value = rng.randrange(110, 991)
        if Decimal(value) not in _RESERVED_VALUES:
            return value


def _draw_years(rng: random.Random) -> tuple[int, int]:
    while True:
        first = rng.randrange(1995, 2012)
        second = first + rng.randrange(1, 6)
        if first not in _RESERVED_YEARS and second not in _RESERVED_YEARS:
            return first, second


def demo_dataset(n: int, seed: int = 0) -> list[ReasoningQuery]:
    """Synthetic queries the simulated solver understands, with gold answers.

    Kinds cycle through the five question templates; the two kinds outside
    the local model's skills exercise the collaboration path.
    """
    rng = random.Random(seed)
    kinds = ("growth", "increase", "total", "average", "ratio")
    queries = []
    for k in range(n):
        kind = kinds[k % len(kinds)]
        org = _ORGS[rng.randrange(len(_ORGS))]
        metric = _METRICS[rng.randrange(len(_METRICS))]
        v1, v2 = _draw_value(rng), _draw_value(rng)
        while v2 == v1:
            v2 = _draw_value(rng)
        y1, y2 = _draw_years(rng)
        filler = f"The {org} publishes its figures for planning purposes."
        s1 = f"{metric} of the {org} for the year {y1} is {v1} ."
        s2 = f"{metric} of the {org} for the year {y2} is {v2} ."
        a, b = Decimal(v1), Decimal(v2)
        if kind == "growth":
            question = f"What is the growth rate of {metric} from {y1} to {y2}?"
            gold = (b - a) / a
        elif kind == "increase":
            question = f"How much did {metric} increase from {y1} to {y2}?"
            gold = b - a
        elif kind == "total":
            question = f"What is the total of {metric} for {y1} and {y2}?"
            gold = a + b
        elif kind == "average":
            question = f"What is the average of {metric} across {y1} and {y2}?"
            gold = (a + b) / 2
        else:
            question = f"What is the ratio of {metric} in {y2} to {metric} in {y1}?"
            gold = b / a
        queries.append(
            ReasoningQuery(
                id=f"sim-{kind}-{k:03d}",
                sentences=((1, filler), (2, s1), (3, s2)),
                question=question,
                gold_answer=gold,
            )
        )
    return queries
