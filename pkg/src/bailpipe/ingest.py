"""Document loading and cleaning: UTF-8 decoding, NFC normalization,
length/duplicate/script filters, case-type normalization, corpus stats."""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

from .config import FilterThresholds, case_type_key
from .errors import DecodingError
from .textutil import is_devanagari, nfc, utf8_len, ws_tokens


class DropReason(Enum):
    KEPT = "Kept"
    TOO_SHORT_BLANK = "TooShortBlank"
    DUPLICATE = "Duplicate"
    TOO_SHORT = "TooShort"
    TOO_LONG = "TooLong"
    NON_TARGET_SCRIPT = "NonTargetScript"


@dataclass(frozen=True)
class FilterVerdict:
    kept: bool
    reason: DropReason

    def __post_init__(self):
        if self.kept != (self.reason is DropReason.KEPT):
            raise ValueError("kept flag must match the reason")


@dataclass
class RawDocument:
    doc_id: str
    district: str
    case_type_raw: str
    text: str
    byte_len: int = 0

    def __post_init__(self):
        self.text = nfc(self.text)
        self.byte_len = utf8_len(self.text)


def content_hash(doc: RawDocument) -> str:
    return hashlib.sha256(doc.text.encode("utf-8")).hexdigest()


def script_ratio(text: str) -> float:
    """Share of alphabetic characters that are Devanagari; 0.0 if none."""
    alpha = 0
    target = 0
    for ch in text:
        if ch.isalpha():
            alpha += 1
            if is_devanagari(ch):
                target += 1
    return target / alpha if alpha else 0.0


def filter_document(
    doc: RawDocument,
    seen_hashes: set[str],
    thresholds: FilterThresholds = FilterThresholds(),
) -> FilterVerdict:
    """Apply the drop rules in order; records the hash only when kept."""
    if doc.byte_len < thresholds.blank_bytes:
        return FilterVerdict(False, DropReason.TOO_SHORT_BLANK)
    digest = content_hash(doc)
    if digest in seen_hashes:
        return FilterVerdict(False, DropReason.DUPLICATE)
    if doc.byte_len < thresholds.min_bytes:
        return FilterVerdict(False, DropReason.TOO_SHORT)
    if doc.byte_len > thresholds.max_bytes:
        return FilterVerdict(False, DropReason.TOO_LONG)
    if script_ratio(doc.text) < thresholds.min_devanagari_ratio:
        return FilterVerdict(False, DropReason.NON_TARGET_SCRIPT)
    seen_hashes.add(digest)
    return FilterVerdict(True, DropReason.KEPT)


class CaseType(NamedTuple):
    name: str
    canonical: bool


def normalize_case_type(raw: str, aliases: dict[str, str]) -> CaseType:
    """Map a raw case-type string onto its canonical name when known."""
    canonical = aliases.get(case_type_key(raw))
    if canonical is not None:
        return CaseType(canonical, True)
    return CaseType(raw, False)


@dataclass(frozen=True)
class CorpusStats:
    n_docs: int
    total_tokens: int
    unique_tokens: int
    mean_tokens_per_doc: float


def corpus_stats(docs: Iterable[RawDocument], tokenizer=ws_tokens) -> CorpusStats:
    n = 0
    total = 0
    vocab: set[str] = set()
    for doc in docs:
        n += 1
        tokens = tokenizer(doc.text)
        total += len(tokens)
        vocab.update(tokens)
    return CorpusStats(
        n_docs=n,
        total_tokens=total,
        unique_tokens=len(vocab),
        mean_tokens_per_doc=total / n if n else 0.0,
    )


def _decode(data: bytes, source: str) -> str:
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DecodingError(source, exc.start) from exc


def iter_jsonl_documents(path: Path) -> Iterator[RawDocument]:
    """Records with doc_id, district, case_type_raw and text fields."""
    raw = _decode(path.read_bytes(), str(path))
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DecodingError(f"{path}:{lineno}", exc.pos) from exc
        yield RawDocument(
            doc_id=str(rec["doc_id"]),
            district=str(rec.get("district", "")),
            case_type_raw=str(rec.get("case_type_raw", rec.get("case_type", ""))),
            text=str(rec["text"]),
        )


def iter_dir_documents(path: Path) -> Iterator[RawDocument]:
    """One document per *.txt file; the file stem becomes the doc id."""
    for file in sorted(path.glob("*.txt")):
        yield RawDocument(
            doc_id=file.stem,
            district="",
            case_type_raw="",
            text=_decode(file.read_bytes(), str(file)),
        )


def load_documents(path: Path) -> Iterator[RawDocument]:
    if path.is_dir():
        return iter_dir_documents(path)
    return iter_jsonl_documents(path)
