"""Number extraction, order-preserving anonymization, and format-faithful rendering.

This module owns the numeric half of the protection scheme: it finds numeric
tokens in text, builds an injective value substitution (with an inverse), and
rewrites text or code so that every occurrence of a mapped value is replaced
while all surrounding characters stay byte-identical.

Three substitution strategies apply, by value class:

* ``Special`` values (month-end days, month ordinals, ...) are fixed points.
* ``YearLike`` integers are shifted by a common random base year, preserving
  all pairwise differences.
* ``General`` values are bucketed by sign and decimal magnitude and swapped
  against freshly sampled targets near the bucket, preserving strict order
  across the whole class.

Structural constants (0, 2, 10, ...) are neither replaced nor ever chosen as
replacement targets, so arithmetic scaffolding like ``/ 100`` survives both
directions of the substitution untouched.
"""

from __future__ import annotations

import itertools
import json
import random
import re
from dataclasses import dataclass
from decimal import Decimal, ROUND_CEILING, ROUND_DOWN, ROUND_FLOOR
from enum import Enum
from typing import Iterable, Mapping, Sequence

__all__ = [
    "NumberFormat",
    "NumberSpan",
    "SwitchPolicy",
    "MappingEntry",
    "NumberMapping",
    "ValueClass",
    "PolicyExhausted",
    "extract_numbers",
    "build_mapping",
    "switch_text",
    "switch_texts",
    "render_number",
]


class PolicyExhausted(Exception):
    """Raised when resampling cannot satisfy the mapping constraints.

    Signals a degenerate policy (for example a target interval too small to
    hold the required number of distinct values), not a transient failure.
    """


_MAX_RESAMPLES = 64
_WIDEN_EVERY = 8

# A numeric token: optional adjacent sign, digits with optional well-formed
# 3-digit comma groups, optional decimal fraction. No exponent notation.
# Boundary guards keep identifier-embedded digits (usage_2013), hex/exponent
# literals (0x1F, 1e5) and trailing-unit merges (1990s) out of scope, while a
# preceding comma stays legal so malformed groups like "43,5935" split apart.
_TEXT_NUMBER = re.compile(
    r"""
    (?<![A-Za-z0-9_.])
    [+-]?
    (?: \d{1,3}(?:,\d{3})+ | \d+ )
    (?: \.\d+ )?
    (?![A-Za-z0-9_])
    """,
    re.VERBOSE,
)

# Code dialect: comma is an argument separator, never a digit group.
_CODE_NUMBER = re.compile(
    r"""
    (?<![A-Za-z0-9_.])
    [+-]?
    \d+ (?: \.\d+ )?
    (?![A-Za-z0-9_])
    """,
    re.VERBOSE,
)

_CURRENCY_CHARS = frozenset("$€£¥")


class ValueClass(str, Enum):
    SPECIAL = "Special"
    YEAR_LIKE = "YearLike"
    GENERAL = "General"


@dataclass(frozen=True)
class NumberFormat:
    """Formatting hints recovered from a source span, used for re-rendering."""

    thousands: bool = False
    decimals: int = 0
    plus_sign: bool = False
    currency: bool = False
    percent: bool = False


@dataclass(frozen=True)
class NumberSpan:
    """One numeric token located in a text."""

    surface: str
    start: int
    end: int
    value: Decimal
    fmt: NumberFormat


def _exact_scale(value: Decimal) -> int:
    """Fraction digits needed to write ``value`` exactly (trailing zeros dropped)."""
    exp = value.normalize().as_tuple().exponent
    return max(0, -int(exp))


def value_scale(value: Decimal) -> int:
    """Fraction digits carried by ``value`` as written (trailing zeros kept)."""
    return max(0, -int(value.as_tuple().exponent))


def _group_thousands(digits: str) -> str:
    out = []
    for i, ch in enumerate(reversed(digits)):
        if i and i % 3 == 0:
            out.append(",")
        out.append(ch)
    return "".join(reversed(out))


def render_number(value: Decimal, fmt: NumberFormat) -> str:
    """Render ``value`` in the style described by ``fmt``.

    The requested decimal-place count is honored when the value can be written
    exactly at that precision; otherwise the minimal exact rendering wins.
    """
    negative = value < 0
    magnitude = -value if negative else value
    scale = max(fmt.decimals, _exact_scale(magnitude))
    quantum = Decimal(1).scaleb(-scale) if scale else Decimal(1)
    text = f"{magnitude.quantize(quantum):f}"
    int_part, _, frac_part = text.partition(".")
    if fmt.thousands:
        int_part = _group_thousands(int_part)
    rendered = int_part + ("." + frac_part if frac_part else "")
    if negative:
        return "-" + rendered
    if fmt.plus_sign:
        return "+" + rendered
    return rendered


def _parse_surface(surface: str) -> Decimal:
    return Decimal(surface.replace(",", "").lstrip("+"))


def _detect_format(text: str, start: int, end: int, surface: str) -> NumberFormat:
    body = surface.lstrip("+-")
    decimals = len(body.partition(".")[2])
    prev = text[start - 1] if start > 0 else ""
    if prev == " " and start > 1:
        prev = text[start - 2]
    nxt = text[end] if end < len(text) else ""
    if nxt == " " and end + 1 < len(text):
        nxt = text[end + 1]
    return NumberFormat(
        thousands="," in body,
        decimals=decimals,
        plus_sign=surface.startswith("+"),
        currency=prev in _CURRENCY_CHARS,
        percent=nxt == "%",
    )


def extract_numbers(text: str, *, code: bool = False) -> list[NumberSpan]:
    """Extract all maximal numeric tokens from ``text``, ordered by offset.

    With ``code=True`` the code dialect is used: no thousands separators, so
    commas always act as argument separators.
    """
    pattern = _CODE_NUMBER if code else _TEXT_NUMBER
    spans = []
    for m in pattern.finditer(text):
        surface = m.group(0)
        spans.append(
            NumberSpan(
                surface=surface,
                start=m.start(),
                end=m.end(),
                value=_parse_surface(surface),
                fmt=_detect_format(text, m.start(), m.end(), surface),
            )
        )
    return spans


@dataclass(frozen=True)
class SwitchPolicy:
    """Knobs governing how replacement values are chosen."""

    special_set: frozenset[int] = frozenset({1, 12, 28, 29, 30, 31})
    year_range: tuple[int, int] = (1990, 2030)
    base_year_range: tuple[int, int] = (1980, 2040)
    general_spread: Decimal = Decimal("0.5")
    structural_constants: frozenset[int] = frozenset({0, 1, 2, 10, 100, 1000})
    seed: int = 0

    def with_seed(self, seed: int) -> "SwitchPolicy":
        return SwitchPolicy(
            special_set=self.special_set,
            year_range=self.year_range,
            base_year_range=self.base_year_range,
            general_spread=self.general_spread,
            structural_constants=self.structural_constants,
            seed=seed,
        )


@dataclass(frozen=True)
class MappingEntry:
    original: Decimal
    transformed: Decimal
    value_class: ValueClass


class NumberMapping:
    """An injective value substitution with total inverse lookup."""

    def __init__(self, entries: Sequence[MappingEntry], seed: int):
        self.entries: tuple[MappingEntry, ...] = tuple(entries)
        self.seed = seed
        self.forward: dict[Decimal, Decimal] = {}
        self.inverse: dict[Decimal, Decimal] = {}
        for e in self.entries:
            self.forward[e.original] = e.transformed
            self.inverse[e.transformed] = e.original
        if len(self.inverse) != len(self.entries):
            raise PolicyExhausted("duplicate transformed values break invertibility")

    def __len__(self) -> int:
        return len(self.entries)

    def __repr__(self) -> str:
        return f"NumberMapping({len(self.entries)} entries, seed={self.seed})"

    def originals(self, *classes: ValueClass) -> set[Decimal]:
        wanted = set(classes) or set(ValueClass)
        return {e.original for e in self.entries if e.value_class in wanted}

    def identity(self) -> bool:
        return all(e.original == e.transformed for e in self.entries)

    def to_json(self) -> str:
        payload = {
            "seed": self.seed,
            "entries": [
                {
                    "original": str(e.original),
                    "transformed": str(e.transformed),
                    "class": e.value_class.value,
                }
                for e in self.entries
            ],
        }
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "NumberMapping":
        payload = json.loads(text)
        entries = [
            MappingEntry(
                original=Decimal(item["original"]),
                transformed=Decimal(item["transformed"]),
                value_class=ValueClass(item["class"]),
            )
            for item in payload["entries"]
        ]
        return cls(entries, seed=int(payload["seed"]))


def classify_value(value: Decimal, policy: SwitchPolicy) -> ValueClass:
    for special in policy.special_set:
        if value == special:
            return ValueClass.SPECIAL
    lo, hi = policy.year_range
    if value == value.to_integral_value() and lo <= value <= hi:
        return ValueClass.YEAR_LIKE
    return ValueClass.GENERAL


def _bucket_key(value: Decimal) -> tuple[bool, int]:
    """Group key: sign plus decimal magnitude, mirrored for negatives."""
    mag = abs(value)
    if mag >= 1:
        magnitude = len(str(int(mag))) - 1
    else:
        magnitude = 0
        while mag < 1:
            mag *= 10
            magnitude -= 1
    return (value < 0, magnitude if value > 0 else -magnitude)


def _bucket_interval(
    lo: Decimal, hi: Decimal, spread: Decimal, widen: int
) -> tuple[Decimal, Decimal]:
    pad_lo = abs(lo) * spread * widen + (widen - 1)
    pad_hi = abs(hi) * spread * widen + (widen - 1)
    a = lo - pad_lo
    b = hi + pad_hi
    # Values at four digits and up may carry thousands separators; keeping
    # their targets on the same side of ±1000 keeps the separator style
    # reproducible in both switch directions.
    if lo >= 1000:
        a = max(a, Decimal(1000))
    if hi <= -1000:
        b = min(b, Decimal(-1000))
    return a, b


def _sample_general(
    values: Sequence[Decimal],
    policy: SwitchPolicy,
    forbidden: set[Decimal],
    rng: random.Random,
) -> dict[Decimal, Decimal]:
    """Order-preserving targets for the General class, resampled on conflict."""
    ordered = sorted(values)
    buckets = [
        list(group) for _, group in itertools.groupby(ordered, key=_bucket_key)
    ]
    for attempt in range(_MAX_RESAMPLES):
        widen = 1 + attempt // _WIDEN_EVERY
        assigned: dict[Decimal, Decimal] = {}
        feasible = True
        for bucket in buckets:
            a, b = _bucket_interval(bucket[0], bucket[-1], policy.general_spread, widen)
            scale = max(value_scale(v) for v in bucket)
            unit = Decimal(1).scaleb(-scale)
            lo_i = int((a / unit).to_integral_value(rounding=ROUND_CEILING))
            hi_i = int((b / unit).to_integral_value(rounding=ROUND_FLOOR))
            if hi_i - lo_i + 1 < len(bucket):
                feasible = False
                break
            picks = rng.sample(range(lo_i, hi_i + 1), len(bucket))
            targets = sorted(Decimal(p) * unit for p in picks)
            for original, target in zip(bucket, targets):
                assigned[original] = target.quantize(
                    Decimal(1).scaleb(-value_scale(original)), rounding=ROUND_DOWN
                )
        if not feasible:
            continue
        flat = [assigned[v] for v in ordered]
        if any(t in forbidden for t in flat):
            continue
        if len(set(flat)) != len(flat):
            continue
        if any(x >= y for x, y in zip(flat, flat[1:])):
            continue
        return assigned
    raise PolicyExhausted(
        f"no admissible order-preserving targets after {_MAX_RESAMPLES} attempts"
    )


def _sample_year_like(
    values: Sequence[Decimal],
    policy: SwitchPolicy,
    forbidden: set[Decimal],
    rng: random.Random,
) -> dict[Decimal, Decimal]:
    ordered = sorted(values)
    first = ordered[0]
    lo, hi = policy.base_year_range
    for _ in range(_MAX_RESAMPLES):
        base = rng.randint(lo, hi)
        targets = [Decimal(base + int(v - first)) for v in ordered]
        if any(t in forbidden for t in targets):
            continue
        return dict(zip(ordered, targets))
    raise PolicyExhausted(
        f"no admissible base year in [{lo}, {hi}] after {_MAX_RESAMPLES} attempts"
    )


def build_mapping(values: Iterable[Decimal], policy: SwitchPolicy) -> NumberMapping:
    """Classify ``values`` and build the substitution under ``policy``.

    The result is fully determined by (values, policy): classification and
    sampling both walk values in sorted order behind a seeded generator.
    Transformed values never collide with structural constants nor with any
    original value, so switched text carries no original YearLike/General
    value and code-literal substitution cannot corrupt constants like 100.

    Structural constants in ``values`` get no entry (they pass through any
    switch unchanged), with one exception: members of the special set always
    get identity entries.
    """
    unique = sorted(set(values))
    rng = random.Random(policy.seed)
    structural = {Decimal(c) for c in policy.structural_constants}

    by_class: dict[ValueClass, list[Decimal]] = {c: [] for c in ValueClass}
    for v in unique:
        cls = classify_value(v, policy)
        if cls is not ValueClass.SPECIAL and v in structural:
            continue
        by_class[cls].append(v)

    protected = set(by_class[ValueClass.YEAR_LIKE]) | set(by_class[ValueClass.GENERAL])
    forbidden = structural | protected | set(by_class[ValueClass.SPECIAL])

    entries: list[MappingEntry] = []
    for v in by_class[ValueClass.SPECIAL]:
        entries.append(MappingEntry(v, v, ValueClass.SPECIAL))

    if by_class[ValueClass.YEAR_LIKE]:
        year_map = _sample_year_like(
            by_class[ValueClass.YEAR_LIKE], policy, forbidden, rng
        )
        forbidden |= set(year_map.values())
        for v in by_class[ValueClass.YEAR_LIKE]:
            entries.append(MappingEntry(v, year_map[v], ValueClass.YEAR_LIKE))

    if by_class[ValueClass.GENERAL]:
        general_map = _sample_general(
            by_class[ValueClass.GENERAL], policy, forbidden, rng
        )
        for v in by_class[ValueClass.GENERAL]:
            entries.append(MappingEntry(v, general_map[v], ValueClass.GENERAL))

    return NumberMapping(entries, seed=policy.seed)


def switch_text(
    text: str,
    mapping: NumberMapping,
    direction: str = "forward",
    *,
    code: bool = False,
) -> str:
    """Replace every mapped numeric token in ``text``, preserving formatting.

    Values absent from the chosen direction pass through unchanged.
    Replacement is simultaneous: rendered targets are never re-scanned.
    """
    table = _direction_table(mapping, direction)
    out = []
    cursor = 0
    for span in extract_numbers(text, code=code):
        replacement = table.get(span.value)
        if replacement is None:
            continue
        out.append(text[cursor : span.start])
        out.append(render_number(replacement, span.fmt))
        cursor = span.end
    out.append(text[cursor:])
    return "".join(out)


def switch_texts(
    texts: Sequence[str],
    mapping: NumberMapping,
    direction: str = "forward",
) -> list[str]:
    return [switch_text(t, mapping, direction) for t in texts]


def _direction_table(mapping: NumberMapping, direction: str) -> Mapping[Decimal, Decimal]:
    if direction == "forward":
        return mapping.forward
    if direction == "inverse":
        return mapping.inverse
    raise ValueError(f"unknown direction {direction!r}")
