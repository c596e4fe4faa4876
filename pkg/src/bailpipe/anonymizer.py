"""Phone-number and gazetteer anonymization.

Phone matching follows a fixed pattern family (optional +/0/91 prefixes over
10- or 12-digit runs, or a 5+6 grouped form) applied once over ASCII digits
and once over Devanagari digits, with leftmost-longest span selection.
Gazetteer terms are replaced only on whole-token matches."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .config import DEFAULT_NAME_TAG, DEFAULT_PHONE_TAG, packaged_data
from .errors import ConfigError
from .textutil import iter_token_spans, nfc


def _phone_variant(digit: str, zero: str, nine_one: str) -> list[re.Pattern[str]]:
    plain = rf"\+*(?:{zero}[ -]*)*"
    with_code = rf"\+*(?:{nine_one} )*"
    return [
        re.compile(plain + rf"(?:{digit}{{12}})+"),
        re.compile(plain + rf"(?:{digit}{{10}})+"),
        re.compile(with_code + rf"(?:{digit}{{12}})+"),
        re.compile(with_code + rf"(?:{digit}{{10}})+"),
        re.compile(rf"{digit}{{5}}[- ]*{digit}{{6}}"),
    ]


_PHONE_PATTERNS = _phone_variant("[0-9]", "0", "91") + _phone_variant(
    "[०-९]", "०", "९१"
)
_PHONE_START = set("+0123456789०१२३४५६७८९")


def find_phone_spans(text: str) -> list[tuple[int, int]]:
    """Non-overlapping phone spans, longest match at each start position."""
    spans: list[tuple[int, int]] = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos] not in _PHONE_START:
            pos += 1
            continue
        best = pos
        for pattern in _PHONE_PATTERNS:
            m = pattern.match(text, pos)
            if m and m.end() > best:
                best = m.end()
        if best > pos:
            spans.append((pos, best))
            pos = best
        else:
            pos += 1
    return spans


def _parse_terms(text: str) -> list[str]:
    terms = []
    for line in text.splitlines():
        term = nfc(line.strip())
        if term and not term.startswith("#"):
            terms.append(term)
    return terms


def _read_terms(path: Path | None, packaged_name: str) -> list[str]:
    if path is None:
        return _parse_terms(packaged_data(packaged_name))
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"gazetteer file not found: {path}")
    return _parse_terms(path.read_text(encoding="utf-8"))


@dataclass(frozen=True)
class Gazetteer:
    """Replacement terms (ambiguous ones already excluded) plus tag strings."""

    single_terms: frozenset[str]
    multi_terms: tuple[tuple[str, ...], ...]  # longest first
    ambiguous: frozenset[str]
    name_tag: str = DEFAULT_NAME_TAG
    phone_tag: str = DEFAULT_PHONE_TAG

    @classmethod
    def load(
        cls,
        replace_path: Path | None = None,
        ambiguous_path: Path | None = None,
        name_tag: str = DEFAULT_NAME_TAG,
        phone_tag: str = DEFAULT_PHONE_TAG,
    ) -> "Gazetteer":
        ambiguous = frozenset(_read_terms(ambiguous_path, "gazetteer_ambiguous.txt"))
        single: set[str] = set()
        multi: set[tuple[str, ...]] = set()
        for term in _read_terms(replace_path, "gazetteer_replace.txt"):
            if term in ambiguous:
                continue
            parts = tuple(term.split())
            if len(parts) > 1:
                multi.add(parts)
            else:
                single.add(term)
        ordered = tuple(sorted(multi, key=lambda t: (-len(t), t)))
        return cls(frozenset(single), ordered, ambiguous, name_tag, phone_tag)


def replace_gazetteer(text: str, gaz: Gazetteer) -> str:
    """Replace whole-token gazetteer matches; longest multi-word terms win."""
    tokens = list(iter_token_spans(text))
    replacements: list[tuple[int, int]] = []
    i = 0
    while i < len(tokens):
        matched = 0
        for term in gaz.multi_terms:
            k = len(term)
            if i + k > len(tokens):
                continue
            window = tokens[i : i + k]
            if tuple(tok.text for tok in window) != term:
                continue
            gaps_ok = all(
                text[window[j].end : window[j + 1].start].isspace()
                for j in range(k - 1)
            )
            if gaps_ok:
                # One tag per token of the matched term.
                replacements.extend((tok.start, tok.end) for tok in window)
                matched = k
                break
        if matched:
            i += matched
            continue
        if tokens[i].text in gaz.single_terms:
            replacements.append((tokens[i].start, tokens[i].end))
        i += 1
    out = text
    for start, end in reversed(replacements):
        out = out[:start] + gaz.name_tag + out[end:]
    return out


def anonymize(text: str, gaz: Gazetteer) -> str:
    """Phone spans first, then gazetteer terms; all other text unchanged."""
    spans = find_phone_spans(text)
    for start, end in reversed(spans):
        text = text[:start] + gaz.phone_tag + text[end:]
    return replace_gazetteer(text, gaz)
