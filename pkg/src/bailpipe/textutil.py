"""Unicode helpers shared by all stages.

Devanagari rides on combining marks (matras, virama) that Python's `\\w`
does not treat as word characters, so token scanning here is based on
Unicode general categories instead of `re` character classes.
"""

from __future__ import annotations

import unicodedata
from typing import Iterator, NamedTuple

DEVANAGARI_START = 0x0900
DEVANAGARI_END = 0x097F
DEVANAGARI_DIGIT_START = 0x0966  # U+0966 is Devanagari zero

# Devanagari digits -> ASCII digits
_DIGIT_MAP = {DEVANAGARI_DIGIT_START + i: ord("0") + i for i in range(10)}


def nfc(text: str) -> str:
    """NFC-normalize a string (the pipeline's canonical form)."""
    return unicodedata.normalize("NFC", text)


def utf8_len(text: str) -> int:
    return len(text.encode("utf-8"))


def ws_tokens(text: str, casefold: bool = False) -> list[str]:
    """Whitespace tokenization after NFC normalization."""
    text = nfc(text)
    if casefold:
        text = text.casefold()
    return text.split()


def is_devanagari(ch: str) -> bool:
    return DEVANAGARI_START <= ord(ch) <= DEVANAGARI_END


def normalize_digits(text: str) -> str:
    """Map Devanagari digits to ASCII digits; everything else unchanged."""
    return text.translate(_DIGIT_MAP)


def is_word_char(ch: str) -> bool:
    """Letters, combining marks and numbers form tokens; all else separates."""
    return unicodedata.category(ch)[0] in ("L", "M", "N")


class TokenSpan(NamedTuple):
    text: str
    start: int
    end: int


def iter_token_spans(text: str) -> Iterator[TokenSpan]:
    """Yield whitespace/punctuation-delimited tokens with codepoint spans."""
    start = None
    for i, ch in enumerate(text):
        if is_word_char(ch):
            if start is None:
                start = i
        elif start is not None:
            yield TokenSpan(text[start:i], start, i)
            start = None
    if start is not None:
        yield TokenSpan(text[start:], start, len(text))


def collapse_ws(text: str) -> str:
    """Collapse all whitespace runs to single spaces and trim."""
    return " ".join(text.split())
