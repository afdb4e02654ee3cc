"""Output similarity functions in [0, 1].

Every comparator scores byte-identical outputs as 1. ``tfidf`` and ``exact``
are symmetric; ``codebleu`` and ``embed_f1`` are directional (candidate
scored against reference).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from ..errors import ContractViolation
from .codebleu import CodeBleuWeights, codebleu, codebleu_components
from .embedding import EmbeddingProvider, HashingEmbedding, RemoteEmbedding, StaticEmbedding, embed_f1
from .lexical import CorpusStats, exact_match_sim, tfidf_cosine
from .tokenize import tokenize, whitespace_tokens

__all__ = [
    "CodeBleuWeights",
    "Comparator",
    "ComparatorConfig",
    "ComparatorKind",
    "CorpusStats",
    "EmbeddingProvider",
    "HashingEmbedding",
    "RemoteEmbedding",
    "StaticEmbedding",
    "codebleu",
    "codebleu_components",
    "embed_f1",
    "exact_match_sim",
    "make_comparator",
    "tfidf_cosine",
    "tokenize",
    "whitespace_tokens",
]


class ComparatorKind(str, Enum):
    EXACT = "exact"
    TFIDF = "tfidf"
    CODEBLEU = "codebleu"
    EMBED_F1 = "embed_f1"

    @classmethod
    def parse(cls, value: str | ComparatorKind) -> ComparatorKind:
        if isinstance(value, ComparatorKind):
            return value
        return cls(value.replace("-", "_"))


@dataclass(frozen=True)
class ComparatorConfig:
    kind: ComparatorKind = ComparatorKind.TFIDF
    codebleu_weights: tuple[float, float, float, float] = (0.25, 0.25, 0.25, 0.25)
    keyword_weight: float = 1.0
    base_weight: float = 0.2
    ngram_order: int = 4
    language_hint: str = "python"
    embedding_provider_id: str | None = None
    embedding_dim: int = 256
    use_idf: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ComparatorKind.parse(self.kind))
        w = self.codebleu_weights
        if len(w) != 4 or any(x < 0 for x in w) or abs(sum(w) - 1.0) > 1e-9:
            raise ContractViolation("codebleu_weights must be 4 non-negative reals summing to 1")
        if self.ngram_order < 1:
            raise ContractViolation("ngram_order must be positive")


class Comparator:
    """Scores a batch of candidate outputs against one reference output."""

    def __init__(self, config: ComparatorConfig, embedding: EmbeddingProvider | None = None) -> None:
        self.config = config
        self.kind = config.kind
        self.embedding = embedding
        if self.kind is ComparatorKind.EMBED_F1 and self.embedding is None:
            if config.embedding_provider_id and config.embedding_provider_id.startswith("http"):
                self.embedding = RemoteEmbedding(config.embedding_provider_id)
            else:
                self.embedding = HashingEmbedding(config.embedding_dim)

    @property
    def name(self) -> str:
        return self.kind.value

    def score(self, candidate: str, reference: str, stats: CorpusStats | None = None) -> float:
        cfg = self.config
        if self.kind is ComparatorKind.EXACT:
            return exact_match_sim(candidate, reference)
        if self.kind is ComparatorKind.TFIDF:
            return tfidf_cosine(candidate, reference, stats)
        if self.kind is ComparatorKind.CODEBLEU:
            return codebleu(
                candidate,
                reference,
                cfg.language_hint,
                weights=CodeBleuWeights(*cfg.codebleu_weights),
                keyword_weight=cfg.keyword_weight,
                base_weight=cfg.base_weight,
                ngram_order=cfg.ngram_order,
            )
        idf = None
        if cfg.use_idf and stats is not None:
            idf = {t: stats.idf(t) for t in set(tokenize(candidate)) | set(tokenize(reference))}
        return embed_f1(candidate, reference, self.embedding, idf)

    def batch(self, reference: str, candidates: Sequence[str]) -> list[float]:
        """Score every candidate; TF-IDF statistics span the reference and all
        candidates of the batch."""
        stats = None
        if self.kind is ComparatorKind.TFIDF or (self.kind is ComparatorKind.EMBED_F1 and self.config.use_idf):
            stats = CorpusStats.build([reference, *candidates])
        memo: dict[str, float] = {}
        out = []
        for c in candidates:
            if c not in memo:
                memo[c] = self.score(c, reference, stats)
            out.append(memo[c])
        return out


def make_comparator(
    config: ComparatorConfig | str, embedding: EmbeddingProvider | None = None
) -> Comparator:
    if not isinstance(config, ComparatorConfig):
        config = ComparatorConfig(kind=ComparatorKind.parse(config))
    return Comparator(config, embedding)
