from __future__ import annotations

import math
import random

import numpy as np
import pytest

from ragroute.corpus import Chunk, tokenize
from ragroute.embedding import cosine_similarity
from ragroute.retrieval import (
    Bm25Index,
    DenseIndex,
    RetrievalHit,
    bm25_search,
    dense_search,
    mixture_search,
    rerank,
)


def make_chunk(chunk_id: str, text: str) -> Chunk:
    return Chunk(chunk_id=chunk_id, doc_id=chunk_id.split(":")[0], text=text,
                 token_start=0, token_len=len(tokenize(text)))


def random_index(rng: np.random.Generator, n: int, dim: int = 8) -> DenseIndex:
    matrix = rng.normal(size=(n, dim)).astype(np.float32)
    return DenseIndex(matrix, [f"c:{i:05d}" for i in range(n)])


def full_scan_oracle(index: DenseIndex, query: np.ndarray, top_n: int) -> list[str]:
    """Oracle: score every row with the public cosine primitive, stable sort."""
    scored = [
        (cosine_similarity(index.matrix[i], query), index.chunk_ids[i])
        for i in range(len(index))
    ]
    scored.sort(key=lambda t: (-t[0], t[1]))
    return [cid for _, cid in scored[:top_n]]


class TestDenseSearch:
    def test_single_chunk_index(self):
        index = DenseIndex(np.array([[1.0, 2.0]], np.float32), ["only:00000"])
        hits = dense_search(index, np.array([0.5, 0.1]), top_n=3)
        assert [h.chunk_id for h in hits] == ["only:00000"]
        assert hits[0].rank == 1

    def test_query_equal_to_stored_embedding(self):
        rng = np.random.default_rng(3)
        index = random_index(rng, 10)
        query = index.matrix[4]
        hits = dense_search(index, query, top_n=1)
        assert hits[0].chunk_id == index.chunk_ids[4]
        assert hits[0].score == pytest.approx(1.0, abs=1e-6)

    def test_matches_full_scan_oracle(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            index = random_index(rng, 50)
            query = rng.normal(size=8)
            got = [h.chunk_id for h in dense_search(index, query, top_n=10)]
            assert got == full_scan_oracle(index, query, 10)

    def test_oracle_equivalence_up_to_thousand_chunks(self):
        rng = np.random.default_rng(23)
        index = random_index(rng, 1000)
        query = rng.normal(size=8)
        got = [h.chunk_id for h in dense_search(index, query, top_n=25)]
        assert got == full_scan_oracle(index, query, 25)

    def test_empty_index(self):
        index = DenseIndex(np.zeros((0, 4), np.float32), [])
        assert dense_search(index, np.ones(4), top_n=5) == []

    def test_scores_non_increasing_ranks_gapless(self):
        rng = np.random.default_rng(5)
        index = random_index(rng, 30)
        hits = dense_search(index, rng.normal(size=8), top_n=30)
        assert [h.rank for h in hits] == list(range(1, 31))
        assert all(a.score >= b.score for a, b in zip(hits, hits[1:]))


def hand_bm25_single_doc(tf: int, doc_len: int, n_query_occurrences: int = 1) -> float:
    """Oracle for a one-chunk corpus: the full formula written out by hand."""
    k1, b = 1.2, 0.75
    idf = math.log(1 + (1 - 1 + 0.5) / (1 + 0.5))
    tf_part = tf * (k1 + 1) / (tf + k1 * (1 - b + b * doc_len / doc_len))
    return n_query_occurrences * idf * tf_part


class TestBm25Search:
    def test_absent_term_returns_empty(self):
        index = Bm25Index.build([make_chunk("d:00000", "a b c")])
        assert bm25_search(index, ["zzz"], top_n=5) == []

    def test_empty_query_returns_empty(self):
        index = Bm25Index.build([make_chunk("d:00000", "a b")])
        assert bm25_search(index, [], top_n=5) == []

    def test_single_chunk_hand_computed_score(self):
        index = Bm25Index.build([make_chunk("d:00000", "a b")])
        hits = bm25_search(index, ["a"], top_n=5)
        assert len(hits) == 1
        assert hits[0].score == pytest.approx(hand_bm25_single_doc(tf=1, doc_len=2), rel=1e-12)

    def test_duplicate_query_terms_accumulate(self):
        index = Bm25Index.build(
            [make_chunk("d:00000", "a b c"), make_chunk("d:00001", "a a b")]
        )
        once = bm25_search(index, ["a"], top_n=5)
        twice = bm25_search(index, ["a", "a"], top_n=5)
        assert [h.chunk_id for h in once] == [h.chunk_id for h in twice]
        for h1, h2 in zip(once, twice):
            assert h2.score == pytest.approx(2 * h1.score, rel=1e-12)

    def test_naive_accumulation_oracle(self):
        chunks = [
            make_chunk("d:00000", "cat dog cat"),
            make_chunk("d:00001", "dog bird"),
            make_chunk("d:00002", "cat fish fish fish"),
        ]
        index = Bm25Index.build(chunks)
        query = ["cat", "fish", "cat"]
        k1, b = 1.2, 0.75
        n = len(chunks)
        avg = sum(len(tokenize(c.text)) for c in chunks) / n

        def naive_score(chunk: Chunk) -> float:
            toks = [t.lower() for t in tokenize(chunk.text)]
            score = 0.0
            for term in query:
                tf = toks.count(term)
                if tf == 0:
                    continue
                df = sum(1 for c in chunks if term in tokenize(c.text))
                idf = math.log(1 + (n - df + 0.5) / (df + 0.5))
                score += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len(toks) / avg))
            return score

        expected = sorted(
            ((naive_score(c), c.chunk_id) for c in chunks if naive_score(c) > 0),
            key=lambda t: (-t[0], t[1]),
        )
        got = bm25_search(index, query, top_n=5)
        assert [h.chunk_id for h in got] == [cid for _, cid in expected]
        for hit, (score, _) in zip(got, expected):
            assert hit.score == pytest.approx(score, rel=1e-12)

    def test_disjoint_chunks_leave_tf_part_untouched(self):
        # Added chunks share no terms with the query, so the query terms' df
        # stays fixed. With Okapi idf the corpus size still moves the score;
        # the per-chunk tf factor must be byte-identical, which shows as one
        # global idf ratio, and the ranking must not change. Chunk lengths
        # equal the old average so avgdl stays fixed too.
        base = [make_chunk("d:00000", "apple banana"), make_chunk("d:00001", "apple pear")]
        extended = base + [make_chunk("d:00002", "zebra yak"), make_chunk("d:00003", "newt gar")]
        before = {h.chunk_id: h.score for h in bm25_search(Bm25Index.build(base), ["apple"], 5)}
        after = {
            h.chunk_id: h.score
            for h in bm25_search(Bm25Index.build(extended), ["apple"], 5)
        }
        assert set(before) == set(after)
        idf_ratio = Bm25Index.build(extended).idf("apple") / Bm25Index.build(base).idf("apple")
        for chunk_id in before:
            assert after[chunk_id] == pytest.approx(before[chunk_id] * idf_ratio, rel=1e-12)
        order_before = sorted(before, key=lambda c: (-before[c], c))
        order_after = sorted(after, key=lambda c: (-after[c], c))
        assert order_before == order_after

    def test_ties_break_by_chunk_id(self):
        index = Bm25Index.build([make_chunk("d:00001", "a b"), make_chunk("d:00000", "a b")])
        hits = bm25_search(index, ["a"], top_n=2)
        assert [h.chunk_id for h in hits] == ["d:00000", "d:00001"]


def hit(chunk_id: str, rank: int, method: str = "dense", score: float | None = None) -> RetrievalHit:
    return RetrievalHit(chunk_id=chunk_id, score=score if score is not None else 1.0 / rank,
                        rank=rank, method=method)


class TestMixtureSearch:
    def test_identical_lists_double_score(self):
        hits = [hit("a", 1), hit("b", 2), hit("c", 3)]
        fused = mixture_search(hits, [h for h in hits], top_n=3)
        assert [h.chunk_id for h in fused] == ["a", "b", "c"]
        for h, orig in zip(fused, hits):
            assert h.score == pytest.approx(2.0 / (60 + orig.rank), rel=1e-12)
            assert h.method == "mixture"

    def test_doubly_ranked_chunk_beats_single_rank_one(self):
        dense = [hit("solo", 1), hit("both", 2)]
        sparse = [hit("both", 2, method="bm25"), hit("other", 1, method="bm25")]
        fused = mixture_search(dense, sparse, top_n=3)
        assert fused[0].chunk_id == "both"
        assert fused[0].score == pytest.approx(2 / 62, rel=1e-12)
        assert 1 / 61 < 2 / 62

    def test_one_empty_list_preserves_other_order(self):
        dense = [hit("x", 1), hit("y", 2), hit("z", 3)]
        fused = mixture_search(dense, [], top_n=3)
        assert [h.chunk_id for h in fused] == ["x", "y", "z"]

    def test_input_list_order_is_irrelevant(self):
        dense = [hit("a", 1), hit("b", 2)]
        sparse = [hit("b", 1, method="bm25"), hit("c", 2, method="bm25")]
        assert mixture_search(dense, sparse, 3) == mixture_search(sparse, dense, 3)

    def test_item_order_within_lists_is_irrelevant(self):
        # fusion reads the rank field, not list position
        dense = [hit("a", 1), hit("b", 2), hit("c", 3)]
        shuffled = [dense[2], dense[0], dense[1]]
        sparse = [hit("c", 1, method="bm25"), hit("a", 2, method="bm25")]
        assert mixture_search(dense, sparse, 3) == mixture_search(shuffled, sparse, 3)

    def test_direct_arithmetic_oracle(self):
        rng = random.Random(99)
        for _ in range(50):
            ids = [f"c{i}" for i in range(rng.randint(1, 12))]
            dense_ids = rng.sample(ids, k=rng.randint(0, len(ids)))
            sparse_ids = rng.sample(ids, k=rng.randint(0, len(ids)))
            dense = [hit(c, r) for r, c in enumerate(dense_ids, 1)]
            sparse = [hit(c, r, method="bm25") for r, c in enumerate(sparse_ids, 1)]
            expected: dict[str, float] = {}
            for lst in (dense_ids, sparse_ids):
                for r, c in enumerate(lst, 1):
                    expected[c] = expected.get(c, 0.0) + 1.0 / (60 + r)
            want = sorted(expected.items(), key=lambda kv: (-kv[1], kv[0]))[:5]
            got = mixture_search(dense, sparse, top_n=5)
            assert [(h.chunk_id, pytest.approx(h.score)) for h in got] == [
                (c, pytest.approx(s)) for c, s in want
            ]


class TestRerank:
    def _index_and_query(self, sims: list[float]) -> tuple[DenseIndex, np.ndarray]:
        """Build 2-D vectors with prescribed cosine similarity to query (1, 0)."""
        rows = [[s, math.sqrt(max(0.0, 1 - s * s))] for s in sims]
        index = DenseIndex(np.array(rows, np.float32), [f"c:{i:05d}" for i in range(len(sims))])
        return index, np.array([1.0, 0.0])

    def test_all_above_threshold_kept_in_similarity_order(self):
        index, query = self._index_and_query([0.9, 0.5, 0.7])
        hits = [hit(cid, r) for r, cid in enumerate(index.chunk_ids, 1)]
        kept = rerank(hits, query, index, min_keep=1, keep_threshold=0.3)
        assert [h.chunk_id for h in kept] == ["c:00000", "c:00002", "c:00001"]
        assert [h.rank for h in kept] == [1, 2, 3]

    def test_floor_rule_when_all_below_threshold(self):
        sims = [0.1, 0.05, 0.2, 0.15, 0.12, 0.01, 0.08, 0.18]
        index, query = self._index_and_query(sims)
        hits = [hit(cid, r) for r, cid in enumerate(index.chunk_ids, 1)]
        kept = rerank(hits, query, index, min_keep=5, keep_threshold=0.3)
        assert len(kept) == 5
        top5 = sorted(range(len(sims)), key=lambda i: (-sims[i], f"c:{i:05d}"))[:5]
        assert [h.chunk_id for h in kept] == [f"c:{i:05d}" for i in top5]

    def test_mixed_case_matches_filter_then_top_up_oracle(self):
        rng = random.Random(42)
        for _ in range(50):
            sims = [round(rng.uniform(0, 1), 3) for _ in range(rng.randint(1, 12))]
            index, query = self._index_and_query(sims)
            hits = [hit(cid, r) for r, cid in enumerate(index.chunk_ids, 1)]
            min_keep = rng.randint(1, 8)
            got = rerank(hits, query, index, min_keep=min_keep, keep_threshold=0.3)
            ranked = sorted(
                ((sims[i], f"c:{i:05d}") for i in range(len(sims))),
                key=lambda t: (-t[0], t[1]),
            )
            passing = [c for s, c in ranked if s >= 0.3 - 1e-9]
            floor = min(min_keep, len(sims))
            expected = passing if len(passing) >= floor else [c for _, c in ranked[:floor]]
            assert [h.chunk_id for h in got] == expected

    def test_never_fewer_than_floor(self):
        index, query = self._index_and_query([0.0, 0.0, 0.0])
        hits = [hit(cid, r) for r, cid in enumerate(index.chunk_ids, 1)]
        assert len(rerank(hits, query, index, min_keep=5, keep_threshold=0.3)) == 3
        assert len(rerank(hits, query, index, min_keep=2, keep_threshold=0.3)) == 2

    def test_empty_hits(self):
        index, query = self._index_and_query([0.5])
        assert rerank([], query, index, min_keep=3) == []
