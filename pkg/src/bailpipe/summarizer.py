"""Sentence encoding and extractive baselines: signed feature hashing,
cosine salience labels against the judge summary, TF-IDF ranking, and
TextRank via damped power iteration."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import ConvergenceError
from .textutil import ws_tokens

_BIGRAM_SEP = ""


def _hash_feature(feature: str, dim: int) -> tuple[int, float]:
    digest = hashlib.blake2b(feature.encode("utf-8"), digest_size=9).digest()
    bucket = int.from_bytes(digest[:8], "little") % dim
    sign = 1.0 if digest[8] & 1 else -1.0
    return bucket, sign


class HashingSentenceEncoder:
    """Unit-norm bag of hashed unigrams and bigrams; empty input maps to e0."""

    def __init__(self, dim: int = 64):
        if dim < 2:
            raise ValueError("encoder dim must be at least 2")
        self.dim = dim

    def encode(self, text: str) -> np.ndarray:
        tokens = ws_tokens(text, casefold=True)
        vec = np.zeros(self.dim)
        features = list(tokens) + [
            a + _BIGRAM_SEP + b for a, b in zip(tokens, tokens[1:])
        ]
        for feat in features:
            bucket, sign = _hash_feature(feat, self.dim)
            vec[bucket] += sign
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            vec[0] = 1.0
            return vec
        return vec / norm

    __call__ = encode


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


class SalienceLabel(NamedTuple):
    index: int
    score: float
    salient: bool


def salience_labels(
    facts: Sequence[str],
    judge_summary: str,
    encoder: HashingSentenceEncoder,
    top_fraction: float = 0.5,
) -> list[SalienceLabel]:
    """Mark the ceil(k * fraction) fact sentences closest to the summary."""
    if not facts:
        raise ValueError("no fact sentences to label")
    if not judge_summary.strip():
        raise ValueError("empty judge summary")
    if not 0.0 < top_fraction <= 1.0:
        raise ValueError("top_fraction must lie in (0, 1]")
    target = encoder(judge_summary)
    scores = [cosine(encoder(s), target) for s in facts]
    m = math.ceil(len(facts) * top_fraction)
    chosen = set(sorted(range(len(facts)), key=lambda i: (-scores[i], i))[:m])
    return [
        SalienceLabel(i, scores[i], i in chosen) for i in range(len(facts))
    ]


@dataclass(frozen=True)
class DocumentFrequencies:
    n_docs: int
    df: dict[str, int]

    @classmethod
    def fit(cls, docs: Iterable[str]) -> "DocumentFrequencies":
        """Count, per token, the number of documents containing it."""
        df: dict[str, int] = {}
        n = 0
        for text in docs:
            n += 1
            for token in set(ws_tokens(text, casefold=True)):
                df[token] = df.get(token, 0) + 1
        return cls(n, df)

    def idf(self, token: str) -> float:
        if self.n_docs < 1:
            raise ValueError("document frequencies were fit on no documents")
        return max(0.0, math.log(self.n_docs / (1 + self.df.get(token, 0))))


class RankedSentence(NamedTuple):
    index: int
    score: float


def tfidf_rank(
    sentences: Sequence[str], dfreq: DocumentFrequencies
) -> list[RankedSentence]:
    """Mean TF-IDF weight per sentence token; ties favour earlier sentences."""
    tokenized = [ws_tokens(s, casefold=True) for s in sentences]
    tf: dict[str, int] = {}
    for tokens in tokenized:
        for t in tokens:
            tf[t] = tf.get(t, 0) + 1
    scores = []
    for tokens in tokenized:
        if not tokens:
            scores.append(0.0)
            continue
        scores.append(
            sum(tf[t] * dfreq.idf(t) for t in tokens) / len(tokens)
        )
    order = sorted(range(len(sentences)), key=lambda i: (-scores[i], i))
    return [RankedSentence(i, scores[i]) for i in order]


def select_salient(ranked: Sequence[RankedSentence], fraction: float = 0.5) -> list[int]:
    """Indices of the top ceil(n * fraction) sentences, in document order."""
    if not ranked:
        return []
    m = math.ceil(len(ranked) * fraction)
    return sorted(r.index for r in ranked[:m])


def _textrank_weights(sentences: Sequence[str]) -> np.ndarray:
    tokenized = [ws_tokens(s, casefold=True) for s in sentences]
    sets = [set(t) for t in tokenized]
    lengths = [len(t) for t in tokenized]
    n = len(sentences)
    w = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            overlap = len(sets[i] & sets[j])
            if overlap == 0 or lengths[i] == 0 or lengths[j] == 0:
                continue
            denom = math.log(lengths[i]) + math.log(lengths[j])
            if denom <= 0.0:
                continue
            w[i, j] = w[j, i] = overlap / denom
    return w


def textrank(
    sentences: Sequence[str],
    damping: float = 0.85,
    tol: float = 1e-6,
    max_iter: int = 200,
) -> list[RankedSentence]:
    """Damped PageRank over token-overlap similarity, power iterated.

    Dangling sentences spread their mass uniformly, so scores always sum
    to one.  Raises if the L1 residual never drops below `tol`."""
    n = len(sentences)
    if n == 0:
        return []
    w = _textrank_weights(sentences)
    out_strength = w.sum(axis=1)
    dangling = out_strength == 0.0
    transition = np.zeros_like(w)
    nonzero = ~dangling
    transition[nonzero] = w[nonzero] / out_strength[nonzero, None]
    scores = np.full(n, 1.0 / n)
    residual = float("inf")
    for _ in range(max_iter):
        spread = transition.T @ scores + scores[dangling].sum() / n
        new = (1.0 - damping) / n + damping * spread
        residual = float(np.abs(new - scores).sum())
        scores = new
        if residual < tol:
            order = sorted(range(n), key=lambda i: (-scores[i], i))
            return [RankedSentence(i, float(scores[i])) for i in order]
    raise ConvergenceError(residual, max_iter)
