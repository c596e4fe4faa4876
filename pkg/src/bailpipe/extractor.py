"""Decision and bail-amount extraction from result segments.

Decisions come from the last decision-token occurrence (longer tokens shadow
substrings they contain).  Amounts are numeric or number-word runs that sit
near a bond/surety context word; surety components never count toward the
total."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .config import PatternConfig
from .errors import WordNumberError
from .textutil import iter_token_spans, normalize_digits


class BailDecision(Enum):
    GRANTED = "granted"
    DISMISSED = "dismissed"
    UNKNOWN = "unknown"


def extract_decision(result_text: str, cfg: PatternConfig) -> BailDecision:
    """Classify by the last decision-token occurrence in the segment."""
    tokens = sorted(
        cfg.granted_tokens + cfg.denied_tokens, key=len, reverse=True
    )
    pattern = re.compile("|".join(re.escape(t) for t in tokens))
    granted = set(cfg.granted_tokens)
    decision = BailDecision.UNKNOWN
    for m in pattern.finditer(result_text):
        decision = (
            BailDecision.GRANTED if m.group() in granted else BailDecision.DISMISSED
        )
    return decision


def parse_word_number(tokens: Sequence[str], number_words: dict[str, int]) -> int:
    """Additive groups scaled by multiplier words (hundred and above)."""
    if not tokens:
        raise WordNumberError("empty number phrase")
    total = 0
    group = 0
    for tok in tokens:
        value = number_words.get(tok)
        if value is None:
            raise WordNumberError(f"unknown number word: {tok}")
        if value >= 100:
            total += max(group, 1) * value
            group = 0
        else:
            group += value
    return total + group


@dataclass(frozen=True)
class AmountComponent:
    value: int
    start: int
    end: int
    kind: str  # "bond" | "surety"

    def to_record(self) -> dict:
        return {
            "value": self.value,
            "start": self.start,
            "end": self.end,
            "kind": self.kind,
        }


@dataclass(frozen=True)
class BailAmount:
    total: int | None
    components: tuple[AmountComponent, ...] = ()


_NUMERIC = re.compile(r"[0-9]+(?:,[0-9]+)*")


def _context_occurrences(text: str, words: Sequence[str]) -> list[tuple[int, int]]:
    spans = []
    for w in words:
        idx = 0
        while (j := text.find(w, idx)) != -1:
            spans.append((j, j + len(w)))
            idx = j + 1
    return spans


def _span_distance(a: tuple[int, int], b: tuple[int, int]) -> int:
    if b[0] >= a[1]:
        return b[0] - a[1]
    if a[0] >= b[1]:
        return a[0] - b[1]
    return 0


def extract_amount(result_text: str, cfg: PatternConfig) -> BailAmount:
    """Candidate amounts near bond/surety words; bond values sum to the total."""
    digits_norm = normalize_digits(result_text)
    candidates: list[tuple[int, int, int]] = []  # (start, end, value)
    for m in _NUMERIC.finditer(digits_norm):
        candidates.append((m.start(), m.end(), int(m.group().replace(",", ""))))

    # Runs of adjacent number words, separated only by whitespace.
    run: list = []
    for tok in iter_token_spans(result_text):
        adjacent = (
            run
            and tok.text in cfg.number_words
            and result_text[run[-1].end : tok.start].isspace()
        )
        if adjacent:
            run.append(tok)
            continue
        if run:
            value = parse_word_number([t.text for t in run], cfg.number_words)
            candidates.append((run[0].start, run[-1].end, value))
            run = []
        if tok.text in cfg.number_words:
            run = [tok]
    if run:
        value = parse_word_number([t.text for t in run], cfg.number_words)
        candidates.append((run[0].start, run[-1].end, value))

    bond_spans = _context_occurrences(result_text, cfg.bond_context)
    surety_spans = _context_occurrences(result_text, cfg.surety_context)
    components = []
    for start, end, value in sorted(candidates):
        span = (start, end)
        bond_d = min(
            (_span_distance(span, c) for c in bond_spans), default=None
        )
        surety_d = min(
            (_span_distance(span, c) for c in surety_spans), default=None
        )
        best = min(
            (d for d in (bond_d, surety_d) if d is not None), default=None
        )
        if best is None or best > cfg.amount_window:
            continue
        kind = "bond" if bond_d is not None and bond_d <= (surety_d if surety_d is not None else bond_d) else "surety"
        components.append(AmountComponent(value, start, end, kind))
    bond_values = [c.value for c in components if c.kind == "bond"]
    total = sum(bond_values) if bond_values else None
    return BailAmount(total, tuple(components))
