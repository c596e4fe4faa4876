"""District-level lexical statistics: per-token district counts and
concentration screening for regionally clustered vocabulary."""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

from .textutil import nfc, ws_tokens


@dataclass(frozen=True)
class TokenDistribution:
    token: str
    total: int
    per_district: dict[str, int]

    def top_k_share(self, k: int) -> float:
        if self.total == 0:
            return 0.0
        top = sorted(self.per_district.values(), reverse=True)[:k]
        return sum(top) / self.total


class DistrictTokenIndex:
    """Casefolded token counts broken down by district."""

    def __init__(self) -> None:
        self._counts: dict[str, Counter[str]] = defaultdict(Counter)
        self._totals: Counter[str] = Counter()

    @classmethod
    def from_documents(
        cls, docs: Iterable[tuple[str, str]]
    ) -> "DistrictTokenIndex":
        """Build from (district, text) pairs."""
        index = cls()
        for district, text in docs:
            index.add(district, text)
        return index

    def add(self, district: str, text: str) -> None:
        for token in ws_tokens(text, casefold=True):
            self._counts[token][district] += 1
            self._totals[token] += 1

    def tokens(self) -> list[str]:
        return sorted(self._totals)

    def distribution(self, token: str) -> TokenDistribution:
        key = nfc(token).casefold()
        return TokenDistribution(
            token=key,
            total=self._totals.get(key, 0),
            per_district=dict(self._counts.get(key, {})),
        )


def _as_index(corpus) -> DistrictTokenIndex:
    if isinstance(corpus, DistrictTokenIndex):
        return corpus
    return DistrictTokenIndex.from_documents(corpus)


def district_concentration(token: str, corpus) -> TokenDistribution:
    """Counts of one token across districts (corpus may be a prebuilt index)."""
    return _as_index(corpus).distribution(token)


def regional_tokens(
    corpus,
    min_total: int = 10,
    min_share: float = 0.5,
    k: int = 6,
) -> list[TokenDistribution]:
    """Tokens whose top-k districts hold at least `min_share` of occurrences.

    Sorted by descending share, then descending total, then token."""
    if min_total < 1 or k < 1:
        raise ValueError("min_total and k must be at least 1")
    if not 0.0 <= min_share <= 1.0:
        raise ValueError("min_share must lie in [0, 1]")
    index = _as_index(corpus)
    out = []
    for token in index.tokens():
        dist = index.distribution(token)
        if dist.total < min_total:
            continue
        if dist.top_k_share(k) < min_share:
            continue
        out.append(dist)
    out.sort(key=lambda d: (-d.top_k_share(k), -d.total, d.token))
    return out
