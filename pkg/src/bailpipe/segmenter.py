"""Structural segmentation of bail orders: header split on the last pivot
occurrence in the opening window, result split on the fact-discussion pivot
backed by a decision token, sentence tagging, and judge-summary extraction."""

from __future__ import annotations

import re
from bisect import bisect_right
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Sequence

from .config import PatternConfig
from .errors import HeaderNotFound, JudgeSummaryUnextractable, ResultNotFound
from .textutil import is_word_char


class TagClass(Enum):
    JUDGE = "judge"
    PROSECUTOR = "prosecutor"
    DEFENDANT = "defendant"
    NONE = "none"


@dataclass(frozen=True)
class Sentence:
    text: str  # stripped
    start: int  # span in the source text, covering delimiters and padding
    end: int
    index: int
    paragraph: int


def _raw_spans(text: str, delimiters: Sequence[str]) -> list[tuple[int, int]]:
    delims = sorted(delimiters, key=len, reverse=True)
    spans = []
    start = 0
    i = 0
    n = len(text)
    while i < n:
        hit = next((d for d in delims if text.startswith(d, i)), None)
        if hit:
            spans.append((start, i + len(hit)))
            i += len(hit)
            start = i
        else:
            i += 1
    if start < n:
        spans.append((start, n))
    return spans


def _merge_contentless(
    text: str, spans: list[tuple[int, int]]
) -> list[tuple[int, int]]:
    """Fold spans without word characters into their neighbours."""
    merged: list[tuple[int, int]] = []
    carry: int | None = None
    for start, end in spans:
        if carry is not None:
            start = carry
            carry = None
        if any(is_word_char(ch) for ch in text[start:end]):
            merged.append((start, end))
        elif merged:
            merged[-1] = (merged[-1][0], end)
        else:
            carry = start
    return merged


def _paragraph_starts(text: str) -> list[int]:
    """Start offsets of blank-line separated blocks."""
    starts = []
    offset = 0
    in_para = False
    for line in text.splitlines(keepends=True):
        if line.strip():
            if not in_para:
                starts.append(offset)
                in_para = True
        else:
            in_para = False
        offset += len(line)
    return starts or [0]


def split_sentences(text: str, cfg: PatternConfig) -> list[Sentence]:
    """Delimiter-based sentences; contentless fragments merge into neighbours."""
    spans = _merge_contentless(text, _raw_spans(text, cfg.delimiters))
    para_starts = _paragraph_starts(text)
    out = []
    for idx, (start, end) in enumerate(spans):
        stripped = text[start:end].strip()
        first = start + (len(text[start:end]) - len(text[start:end].lstrip()))
        para = bisect_right(para_starts, first) - 1
        out.append(Sentence(stripped, start, end, idx, max(para, 0)))
    return out


def split_header(text: str, cfg: PatternConfig) -> tuple[str, str]:
    """Header ends after the pivot line's paragraph plus one following line."""
    window_end = int(len(text) * cfg.header_window)
    best = -1
    for pivot in cfg.header_pivots:
        idx = 0
        while True:
            j = text.find(pivot, idx)
            if j == -1 or j >= window_end:
                break
            best = max(best, j)
            idx = j + 1
    if best < 0:
        raise HeaderNotFound(
            f"no header pivot within the first {cfg.header_window:.0%} of the text"
        )
    lines = text.splitlines(keepends=True)
    offsets = []
    pos = 0
    for line in lines:
        offsets.append(pos)
        pos += len(line)
    pivot_line = bisect_right(offsets, best) - 1
    j = pivot_line + 1
    while j < len(lines) and lines[j].strip():
        j += 1
    while j < len(lines) and not lines[j].strip():
        j += 1
    if j < len(lines):
        j += 1
    cut = offsets[j] if j < len(lines) else len(text)
    return text[:cut], text[cut:]


def split_result(
    text: str,
    cfg: PatternConfig,
    decision_tokens: Sequence[str] | None = None,
) -> tuple[str, str]:
    """Split before the last pivot sentence whose tail holds a decision token."""
    spans = _merge_contentless(text, _raw_spans(text, cfg.delimiters))
    starts = [s for s, _ in spans]
    tokens = (
        list(decision_tokens)
        if decision_tokens is not None
        else cfg.granted_tokens + cfg.denied_tokens
    )
    occurrences = []
    idx = 0
    while (j := text.find(cfg.result_pivot, idx)) != -1:
        occurrences.append(j)
        idx = j + 1
    for j in reversed(occurrences):
        k = bisect_right(starts, j) - 1
        if k < 0:
            continue
        cut = spans[k][0]
        tail = text[cut:]
        if any(tok in tail for tok in tokens):
            return text[:cut], tail
    raise ResultNotFound(
        "no fact-discussion pivot followed by a decision token"
    )


def tag_sentences(
    sentences: Sequence[Sentence], cfg: PatternConfig
) -> list[tuple[Sentence, TagClass]]:
    """First matching class in precedence order, then forward fill inside
    each paragraph."""
    order = [(TagClass(name), pats) for name, pats in cfg.tag_patterns.items()]
    tagged: list[tuple[Sentence, TagClass]] = []
    last: TagClass | None = None
    last_para = -1
    for sent in sentences:
        tag = TagClass.NONE
        for cls, patterns in order:
            if any(p.search(sent.text) for p in patterns):
                tag = cls
                break
        if sent.paragraph != last_para:
            last = None
            last_para = sent.paragraph
        if tag is TagClass.NONE and last is not None:
            tag = last
        elif tag is not TagClass.NONE:
            last = tag
        tagged.append((sent, tag))
    return tagged


def extract_judge_summary(
    tagged: Sequence[tuple[Sentence, TagClass]]
) -> tuple[list[Sentence], list[Sentence]]:
    """Facts and judge-summary sentences, both in document order.

    Walks back from the end through judge- and untagged sentences, absorbing
    the untagged ones into the summary; fails unless the walk saw a
    judge-tagged sentence."""
    if not tagged:
        raise JudgeSummaryUnextractable("no sentences to extract from")
    absorbed: set[int] = set()
    seen_judge = False
    for i in range(len(tagged) - 1, -1, -1):
        tag = tagged[i][1]
        if tag is TagClass.JUDGE:
            seen_judge = True
        elif tag is TagClass.NONE:
            absorbed.add(i)
        else:
            break
    if not seen_judge:
        raise JudgeSummaryUnextractable(
            "document does not end in judge-attributed reasoning"
        )
    summary_idx = {
        i for i, (_, tag) in enumerate(tagged) if tag is TagClass.JUDGE
    } | absorbed
    facts = [s for i, (s, _) in enumerate(tagged) if i not in summary_idx]
    judge = [tagged[i][0] for i in sorted(summary_idx)]
    return facts, judge


@dataclass
class SegmentedBailDocument:
    doc_id: str
    district: str
    case_type: str
    header: str
    facts: list[str]
    judge_sentences: list[str]
    result: str
    facts_indices: list[int]
    judge_indices: list[int]
    decision: str | None = None
    amount_total: int | None = None
    amount_components: list[dict[str, Any]] = field(default_factory=list)

    @property
    def judge_summary(self) -> str:
        return " ".join(self.judge_sentences)

    def to_record(self) -> dict[str, Any]:
        return {
            "doc_id": self.doc_id,
            "district": self.district,
            "case_type": self.case_type,
            "header": self.header,
            "facts": self.facts,
            "judge_sentences": self.judge_sentences,
            "result": self.result,
            "facts_indices": self.facts_indices,
            "judge_indices": self.judge_indices,
            "decision": self.decision,
            "amount_total": self.amount_total,
            "amount_components": self.amount_components,
        }

    @classmethod
    def from_record(cls, rec: dict[str, Any]) -> "SegmentedBailDocument":
        return cls(
            doc_id=rec["doc_id"],
            district=rec["district"],
            case_type=rec.get("case_type", ""),
            header=rec["header"],
            facts=list(rec["facts"]),
            judge_sentences=list(rec["judge_sentences"]),
            result=rec["result"],
            facts_indices=list(rec["facts_indices"]),
            judge_indices=list(rec["judge_indices"]),
            decision=rec.get("decision"),
            amount_total=rec.get("amount_total"),
            amount_components=list(rec.get("amount_components", [])),
        )


def segment_document(
    doc_id: str,
    district: str,
    case_type: str,
    text: str,
    cfg: PatternConfig,
) -> SegmentedBailDocument:
    """Run the full header/result/tag/summary chain on one document."""
    header, body = split_header(text, cfg)
    middle, result = split_result(body, cfg)
    sentences = split_sentences(middle, cfg)
    tagged = tag_sentences(sentences, cfg)
    facts, judge = extract_judge_summary(tagged)
    if not facts:
        raise JudgeSummaryUnextractable(
            "no fact sentences remain outside the judge summary"
        )
    return SegmentedBailDocument(
        doc_id=doc_id,
        district=district,
        case_type=case_type,
        header=header,
        facts=[s.text for s in facts],
        judge_sentences=[s.text for s in judge],
        result=result,
        facts_indices=[s.index for s in facts],
        judge_indices=[s.index for s in judge],
    )
