"""Exact-match and TF-IDF cosine comparators."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

from .tokenize import tokenize


def exact_match_sim(a: str, b: str) -> float:
    return 1.0 if a.encode("utf-8") == b.encode("utf-8") else 0.0


@dataclass(frozen=True)
class CorpusStats:
    """Document frequencies over one instance's outputs."""

    n_docs: int
    df: Counter = field(default_factory=Counter)

    @classmethod
    def build(cls, docs: Iterable[str]) -> CorpusStats:
        df: Counter = Counter()
        n = 0
        for doc in docs:
            n += 1
            df.update(set(tokenize(doc)))
        return cls(n, df)

    def idf(self, token: str) -> float:
        # Smoothed idf: every token keeps a positive weight.
        return math.log((1 + self.n_docs) / (1 + self.df.get(token, 0))) + 1.0


def tfidf_vector(text: str, stats: CorpusStats) -> dict[str, float]:
    return {tok: tf * stats.idf(tok) for tok, tf in Counter(tokenize(text)).items()}


def cosine(u: dict[str, float], v: dict[str, float]) -> float:
    if len(u) > len(v):
        u, v = v, u
    dot = sum(w * v.get(t, 0.0) for t, w in u.items())
    nu = math.sqrt(sum(w * w for w in u.values()))
    nv = math.sqrt(sum(w * w for w in v.values()))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return min(1.0, max(0.0, dot / (nu * nv)))


def tfidf_cosine(a: str, b: str, corpus_stats: CorpusStats | None = None) -> float:
    """Cosine similarity of raw-count TF times smoothed IDF vectors.

    Without ``corpus_stats`` the corpus is just ``[a, b]``.
    """
    if a == b:
        return 1.0
    stats = corpus_stats if corpus_stats is not None else CorpusStats.build([a, b])
    return cosine(tfidf_vector(a, stats), tfidf_vector(b, stats))
