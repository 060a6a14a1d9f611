"""Per-agent retrieval: dense cosine scan, Okapi BM25, rank fusion, rerank.

Indexes are immutable after build; searches are read-only. The dense index is
an exhaustive scan (desk-scale corpora, no ANN). Ties always break by
ascending chunk_id so results are deterministic.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Chunk, tokenize
from .embedding import load_vectors, save_vectors

DENSE = "dense"
BM25 = "bm25"
MIXTURE = "mixture"

BM25_K1 = 1.2
BM25_B = 0.75
RRF_K = 60


@dataclass(frozen=True)
class RetrievalHit:
    chunk_id: str
    score: float
    rank: int
    method: str


class DenseIndex:
    """Chunk embeddings as one float32 matrix with a parallel chunk_id list."""

    def __init__(self, matrix: np.ndarray, chunk_ids: list[str]):
        matrix = np.asarray(matrix, dtype=np.float32)
        if matrix.ndim != 2 or matrix.shape[0] != len(chunk_ids):
            raise ValueError("matrix rows must match chunk_ids")
        norms = np.linalg.norm(matrix.astype(np.float64), axis=1)
        if matrix.shape[0] and not np.all(norms > 0.0):
            raise ValueError("zero vector in dense index")
        self.matrix = matrix
        self.chunk_ids = list(chunk_ids)
        self._unit = (
            matrix.astype(np.float64) / norms[:, None] if matrix.shape[0] else matrix.astype(np.float64)
        )

    def __len__(self) -> int:
        return len(self.chunk_ids)

    def save(self, base_path: str | Path) -> None:
        save_vectors(base_path, self.matrix, self.chunk_ids)

    @classmethod
    def load(cls, base_path: str | Path) -> "DenseIndex":
        matrix, chunk_ids = load_vectors(base_path)
        return cls(matrix, chunk_ids)


def dense_search(index: DenseIndex, query_vec: np.ndarray, top_n: int) -> list[RetrievalHit]:
    """Top-n chunks by cosine similarity; exhaustive scan."""
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    if len(index) == 0:
        return []
    q = np.asarray(query_vec, dtype=np.float64)
    qn = np.linalg.norm(q)
    if qn == 0.0:
        raise ValueError("undefined similarity: zero query vector")
    sims = index._unit @ (q / qn)
    order = sorted(range(len(index)), key=lambda i: (-sims[i], index.chunk_ids[i]))
    return [
        RetrievalHit(chunk_id=index.chunk_ids[i], score=float(sims[i]), rank=r, method=DENSE)
        for r, i in enumerate(order[:top_n], 1)
    ]


class Bm25Index:
    """Inverted index with Okapi BM25 scoring (k1=1.2, b=0.75).

    idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)), kept non-negative for
    corpus-dominating terms.
    """

    def __init__(self, postings: dict[str, dict[str, int]], doc_len: dict[str, int]):
        self.postings = postings
        self.doc_len = doc_len
        self.n_chunks = len(doc_len)
        self.avg_len = (sum(doc_len.values()) / self.n_chunks) if self.n_chunks else 0.0

    @classmethod
    def build(cls, chunks: list[Chunk]) -> "Bm25Index":
        postings: dict[str, dict[str, int]] = {}
        doc_len: dict[str, int] = {}
        for chunk in chunks:
            terms = [t.lower() for t in tokenize(chunk.text)]
            doc_len[chunk.chunk_id] = len(terms)
            for term, tf in Counter(terms).items():
                postings.setdefault(term, {})[chunk.chunk_id] = tf
        return cls(postings, doc_len)

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, {}))
        return math.log(1.0 + (self.n_chunks - df + 0.5) / (df + 0.5))

    def save(self, path: str | Path) -> None:
        payload = {"postings": self.postings, "doc_len": self.doc_len}
        Path(path).write_text(
            json.dumps(payload, sort_keys=True, ensure_ascii=False), encoding="utf-8"
        )

    @classmethod
    def load(cls, path: str | Path) -> "Bm25Index":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        postings = {t: {c: int(tf) for c, tf in post.items()} for t, post in payload["postings"].items()}
        doc_len = {c: int(n) for c, n in payload["doc_len"].items()}
        return cls(postings, doc_len)


def bm25_search(index: Bm25Index, query_tokens: list[str], top_n: int) -> list[RetrievalHit]:
    """Okapi BM25 ranking; chunks sharing no query term are excluded.

    Query terms are scored with multiplicity, so a duplicated term counts
    exactly like a weight of two on the deduplicated term.
    """
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    terms = [t.lower() for t in query_tokens]
    if not terms:
        return []
    scores: dict[str, float] = {}
    for term in terms:
        posting = index.postings.get(term)
        if not posting:
            continue
        idf = index.idf(term)
        for chunk_id, tf in posting.items():
            dl = index.doc_len[chunk_id]
            denom = tf + BM25_K1 * (1.0 - BM25_B + BM25_B * dl / index.avg_len)
            scores[chunk_id] = scores.get(chunk_id, 0.0) + idf * tf * (BM25_K1 + 1.0) / denom
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return [
        RetrievalHit(chunk_id=cid, score=score, rank=r, method=BM25)
        for r, (cid, score) in enumerate(ranked[:top_n], 1)
    ]


def mixture_search(
    dense_hits: list[RetrievalHit], bm25_hits: list[RetrievalHit], top_n: int
) -> list[RetrievalHit]:
    """Reciprocal-rank fusion of two hit lists: score = sum of 1/(60 + rank)."""
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    fused: dict[str, float] = {}
    for hits in (dense_hits, bm25_hits):
        for hit in hits:
            fused[hit.chunk_id] = fused.get(hit.chunk_id, 0.0) + 1.0 / (RRF_K + hit.rank)
    ranked = sorted(fused.items(), key=lambda kv: (-kv[1], kv[0]))
    return [
        RetrievalHit(chunk_id=cid, score=score, rank=r, method=MIXTURE)
        for r, (cid, score) in enumerate(ranked[:top_n], 1)
    ]


def rerank(
    hits: list[RetrievalHit],
    query_vec: np.ndarray,
    index: DenseIndex,
    min_keep: int,
    keep_threshold: float = 0.3,
) -> list[RetrievalHit]:
    """Re-score hits by cosine similarity to the query and drop weak ones.

    Keeps every hit scoring >= keep_threshold but never fewer than
    min(min_keep, len(hits)), taken in descending similarity.
    """
    if min_keep < 1:
        raise ValueError("min_keep must be >= 1")
    if not hits:
        return []
    q = np.asarray(query_vec, dtype=np.float64)
    qn = np.linalg.norm(q)
    if qn == 0.0:
        raise ValueError("undefined similarity: zero query vector")
    row = {cid: i for i, cid in enumerate(index.chunk_ids)}
    scored = [
        (float(index._unit[row[h.chunk_id]] @ (q / qn)), h.chunk_id, h.method) for h in hits
    ]
    scored.sort(key=lambda t: (-t[0], t[1]))
    floor = min(min_keep, len(scored))
    kept = [t for t in scored if t[0] >= keep_threshold]
    if len(kept) < floor:
        kept = scored[:floor]
    return [
        RetrievalHit(chunk_id=cid, score=sim, rank=r, method=method)
        for r, (sim, cid, method) in enumerate(kept, 1)
    ]
