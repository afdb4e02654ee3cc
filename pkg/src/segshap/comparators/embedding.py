"""Greedy-matching F1 over token embeddings (BERTScore-style)."""

from __future__ import annotations

import hashlib
from functools import lru_cache
from typing import Mapping, Protocol, Sequence

import httpx
import numpy as np

from ..errors import ComparatorError
from .tokenize import tokenize


class EmbeddingProvider(Protocol):
    provider_id: str

    def embed(self, tokens: Sequence[str]) -> np.ndarray:
        """Return one vector per token, shape ``(len(tokens), dim)``."""
        ...


class HashingEmbedding:
    """Offline deterministic embedding from hashed character trigrams.

    Tokens sharing character trigrams get correlated vectors. Components are
    non-negative counts, so cosines fall in [0, 1].
    """

    def __init__(self, dim: int = 256) -> None:
        self.dim = dim
        self.provider_id = f"hashing-{dim}"
        self._vector = lru_cache(maxsize=65536)(self._compute)

    def _compute(self, token: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        padded = f"<{token}>"
        grams = [padded[i:i + 3] for i in range(max(1, len(padded) - 2))]
        grams.append(padded)  # whole-token feature keeps distinct tokens apart
        for g in grams:
            h = hashlib.blake2b(g.encode("utf-8"), digest_size=8).digest()
            vec[int.from_bytes(h, "little") % self.dim] += 1.0
        return vec

    def embed(self, tokens: Sequence[str]) -> np.ndarray:
        if not tokens:
            return np.zeros((0, self.dim))
        return np.stack([self._vector(t) for t in tokens])


class StaticEmbedding:
    """Lookup-table provider; unknown tokens raise ``KeyError``."""

    def __init__(self, vectors: Mapping[str, Sequence[float]], provider_id: str = "static") -> None:
        self.vectors = {k: np.asarray(v, dtype=float) for k, v in vectors.items()}
        self.provider_id = provider_id

    def embed(self, tokens: Sequence[str]) -> np.ndarray:
        return np.stack([self.vectors[t] for t in tokens])


class RemoteEmbedding:
    """HTTP provider: POST ``{"tokens": [...]}`` -> ``{"vectors": [[...], ...]}``."""

    def __init__(self, url: str, *, timeout: float = 30.0, client: httpx.Client | None = None) -> None:
        self.url = url
        self.provider_id = f"remote:{url}"
        self._client = client or httpx.Client(timeout=timeout)
        self._dim: int | None = None

    def embed(self, tokens: Sequence[str]) -> np.ndarray:
        resp = self._client.post(self.url, json={"tokens": list(tokens)})
        resp.raise_for_status()
        vecs = np.asarray(resp.json()["vectors"], dtype=float)
        if vecs.ndim != 2 or vecs.shape[0] != len(tokens):
            raise ValueError(f"expected {len(tokens)} vectors, got shape {vecs.shape}")
        if self._dim is None:
            self._dim = vecs.shape[1]
        elif vecs.shape[1] != self._dim:
            raise ValueError(f"dimension changed from {self._dim} to {vecs.shape[1]}")
        return vecs


def _unit_rows(m: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    return np.divide(m, norms, out=np.zeros_like(m), where=norms > 0)


def embed_f1(
    candidate: str,
    reference: str,
    provider: EmbeddingProvider,
    idf: Mapping[str, float] | None = None,
) -> float:
    """Harmonic mean of greedy-matching precision and recall.

    Each candidate token is matched to its most similar reference token
    (precision) and vice versa (recall). Negative cosines count as 0. With
    ``idf`` the per-token maxima are idf-weighted averages instead of plain
    means.
    """
    if candidate == reference:
        return 1.0
    cand, ref = tokenize(candidate), tokenize(reference)
    if not cand or not ref:
        return 0.0
    try:
        c = _unit_rows(np.asarray(provider.embed(cand), dtype=float))
        r = _unit_rows(np.asarray(provider.embed(ref), dtype=float))
        sim = np.clip(c @ r.T, 0.0, 1.0)
    except Exception as exc:  # provider contract is loose; wrap everything
        raise ComparatorError("provider", str(exc)) from exc
    best_c, best_r = sim.max(axis=1), sim.max(axis=0)
    if idf is None:
        precision, recall = float(best_c.mean()), float(best_r.mean())
    else:
        wc = np.array([idf.get(t, 1.0) for t in cand])
        wr = np.array([idf.get(t, 1.0) for t in ref])
        precision = float(best_c @ wc / wc.sum()) if wc.sum() > 0 else 0.0
        recall = float(best_r @ wr / wr.sum()) if wr.sum() > 0 else 0.0
    if precision + recall <= 0.0:
        return 0.0
    return min(1.0, 2 * precision * recall / (precision + recall))
