"""Answer canonicalization and matching.

Every numeric answer in the system, whatever produced it, is compared in one
canonical form: a Decimal rounded half-away-from-zero to five decimal places.
Matching additionally accepts the percent dual reading (a prediction off from
the gold by exactly a factor of 100), since gold answers mix ratio and
percent conventions.
"""

from __future__ import annotations

from decimal import Decimal, ROUND_HALF_UP

from .numbers import extract_numbers

__all__ = ["NotNumeric", "normalize_answer", "answers_match", "FIVE_DP"]

FIVE_DP = Decimal("0.00001")


class NotNumeric(Exception):
    """The text carries no parseable numeric answer."""


def normalize_answer(raw: str | int | float | Decimal) -> Decimal:
    """Canonical 5-decimal-place form of an answer.

    Strings are scanned for their first numeric token after stripping
    currency symbols; thousands separators are understood by the number
    grammar itself. Idempotent: normalizing a normalized value is a no-op.
    """
    if isinstance(raw, Decimal):
        value = raw
    elif isinstance(raw, (int, float)):
        value = Decimal(repr(raw)) if isinstance(raw, float) else Decimal(raw)
    else:
        text = raw.strip()
        for symbol in "$€£¥":
            text = text.replace(symbol, "")
        spans = extract_numbers(text)
        if not spans:
            raise NotNumeric(f"no numeric token in {raw!r}")
        value = spans[0].value
    return value.quantize(FIVE_DP, rounding=ROUND_HALF_UP)


def answers_match(pred: Decimal | None, gold: Decimal | None) -> bool:
    """Equality at five decimal places, or under the percent dual reading."""
    if pred is None or gold is None:
        return False
    pred = pred.quantize(FIVE_DP, rounding=ROUND_HALF_UP)
    gold = gold.quantize(FIVE_DP, rounding=ROUND_HALF_UP)
    if pred == gold:
        return True
    scaled_up = (pred * 100).quantize(FIVE_DP, rounding=ROUND_HALF_UP)
    scaled_down = (pred / 100).quantize(FIVE_DP, rounding=ROUND_HALF_UP)
    return gold in (scaled_up, scaled_down)
