"""
Tests for BM25, rank fusion, reranking and evidence contexts
"""

import math
from collections import Counter

import numpy as np
import pytest

from anchorchain.config import ChunkingConfig, RetrievalConfig
from anchorchain.core.backends import ScriptedBackend
from anchorchain.core.reranking import CompletionReranker
from anchorchain.corpus.base import Chunk
from anchorchain.corpus.store import CorpusStore
from anchorchain.errors import BackendError, ConfigError, DataError, RerankError, ScriptExhaustedError
from anchorchain.retrieval.base import EvidenceContext, RankedList, context_from_lists, merge_dedup
from anchorchain.retrieval.fusion import fuse_rrf
from anchorchain.retrieval.lexical import LexicalIndex, build_lexical_index, chunk_tokens, tokenize
from anchorchain.retrieval.rerank import OverlapReranker, rerank
from anchorchain.retrieval.retriever import Retriever

from conftest import write_lines


def reference_bm25(chunks, query, k1=1.2, b=0.75):
    """Brute-force BM25 straight from the formula."""
    docs = {c.chunk_id: Counter(chunk_tokens(c)) for c in chunks}
    lengths = {cid: sum(tf.values()) for cid, tf in docs.items()}
    n = len(docs)
    avgdl = float(sum(lengths.values())) / n
    scores = {cid: 0.0 for cid in docs}
    for term in sorted(set(tokenize(query))):
        df = sum(1 for tf in docs.values() if term in tf)
        if df == 0:
            continue
        idf = math.log(1.0 + (n - df + 0.5) / (df + 0.5))
        for cid, tf in docs.items():
            if term in tf:
                f = float(tf[term])
                norm = k1 * (1.0 - b + b * lengths[cid] / avgdl)
                scores[cid] += idf * (f * (k1 + 1.0)) / (f + norm)
    matched = {cid for cid, tf in docs.items() if any(t in tf for t in tokenize(query))}
    return {cid: s for cid, s in scores.items() if cid in matched}


QUERIES = ["bay city port", "the alpha river", "mountain range lake", "who founded the port authority", "zebra"]
FUZZ_VOCAB = ["ash", "bay", "cove", "dune", "elm", "fen", "glen", "harbor"]


class TestLexicalIndex:

    @pytest.mark.asyncio
    async def test_scores_match_reference(self, tiny_store):
        chunks = list(tiny_store.iter_chunks())
        index = build_lexical_index(chunks)
        for query in QUERIES:
            expected = reference_bm25(chunks, query)
            ranked = index.search(query, len(chunks))
            assert set(ranked.chunk_ids) == set(expected)
            for chunk_id, score in ranked.entries:
                assert score == pytest.approx(expected[chunk_id], rel=1e-12)
            order = sorted(expected, key=lambda cid: (-expected[cid], cid))
            assert ranked.chunk_ids == order

    def test_random_corpora_match_reference(self):
        rng = np.random.default_rng(2024)
        for case in range(200):
            chunks = []
            for i in range(int(rng.integers(1, 21))):
                text = " ".join(rng.choice(FUZZ_VOCAB, size=int(rng.integers(1, 12))))
                chunks.append(Chunk(chunk_id=f"d{i:02d}#0", doc_id=f"d{i:02d}", title="",
                                    text=text, char_span=(0, len(text))))
            query = " ".join(rng.choice(FUZZ_VOCAB + ["zebra"], size=int(rng.integers(1, 6))))
            expected = reference_bm25(chunks, query)
            ranked = LexicalIndex(chunks).search(query, len(chunks))
            assert ranked.chunk_ids == sorted(expected, key=lambda cid: (-expected[cid], cid)), case
            for chunk_id, score in ranked.entries:
                assert score == pytest.approx(expected[chunk_id], rel=1e-12)

    @pytest.mark.asyncio
    async def test_top_k_and_no_match(self, tiny_store):
        index = build_lexical_index(tiny_store.iter_chunks())
        assert len(index.search("the", 2)) == 2
        assert index.search("zebra", 5).entries == []
        with pytest.raises(ValueError):
            index.search("bay", 0)

    @pytest.mark.asyncio
    async def test_idf_is_positive_even_for_common_terms(self, tiny_store):
        index = build_lexical_index(tiny_store.iter_chunks())
        assert index.document_frequency("the") >= 3
        assert index.idf("the") > 0.0
        assert index.idf("alpha") > index.idf("the")

    def test_tie_break_on_chunk_id(self):
        chunks = [
            Chunk(chunk_id="b#0", doc_id="b", title="", text="same words", char_span=(0, 10)),
            Chunk(chunk_id="a#0", doc_id="a", title="", text="same words", char_span=(0, 10)),
        ]
        ranked = LexicalIndex(chunks).search("same", 2)
        assert ranked.chunk_ids == ["a#0", "b#0"]

    def test_empty_corpus(self):
        with pytest.raises(DataError):
            LexicalIndex([])

    @pytest.mark.asyncio
    async def test_digest_is_stable(self, tiny_store):
        first = build_lexical_index(tiny_store.iter_chunks()).digest()
        second = build_lexical_index(tiny_store.iter_chunks()).digest()
        assert first == second
        assert LexicalIndex(tiny_store.iter_chunks(), k1=1.5).digest() != first


class TestRankedLists:

    def test_rejects_unsorted_entries(self):
        with pytest.raises(ValueError):
            RankedList(query="q", entries=[("a", 0.1), ("b", 0.9)])

    def test_rejects_duplicates(self):
        with pytest.raises(ValueError):
            RankedList(query="q", entries=[("a", 0.9), ("a", 0.1)])

    def test_rrf_fusion(self):
        first = RankedList(query="q", entries=[("a", 3.0), ("b", 2.0)])
        second = RankedList(query="q", entries=[("b", 0.9), ("c", 0.5)])
        fused = fuse_rrf([first, second], k=10)
        assert fused.chunk_ids == ["b", "a", "c"]
        assert fused.entries[0][1] == pytest.approx(1 / 62 + 1 / 61)
        assert fused.entries[1][1] == pytest.approx(1 / 61)

    def test_rrf_tie_breaks_on_chunk_id(self):
        fused = fuse_rrf([
            RankedList(query="q", entries=[("a", 2.0), ("b", 1.0)]),
            RankedList(query="q", entries=[("b", 2.0), ("a", 1.0)]),
        ], k=10, rrf_constant=60)
        assert fused.chunk_ids == ["a", "b"]
        assert fused.entries[0][1] == fused.entries[1][1] == pytest.approx(1 / 61 + 1 / 62)

    def test_merge_dedup_keeps_first_occurrence(self):
        first = RankedList(query="q1", entries=[("a", 2.0), ("b", 1.0)])
        second = RankedList(query="q2", entries=[("b", 5.0), ("c", 1.0)])
        ctx = context_from_lists([first, second])
        assert ctx.entries == ["a", "b", "c"]
        assert len(ctx) < len(first) + len(second)
        assert ctx.provenance["b"].source_query == "q1"
        assert ctx.provenance["c"].hop_index == 1

    def test_merge_dedup_is_monotone(self):
        ctx = EvidenceContext(entries=["a"])
        merged = merge_dedup(ctx, RankedList(query="q", entries=[("b", 1.0)]), "hop", 1, "q")
        assert ctx.entries == ["a"]
        assert merged.entries == ["a", "b"]
        assert merged.provenance["b"].stage == "hop"


class TestRetriever:

    @pytest.mark.asyncio
    async def test_retrieve_reranks_candidates(self, tiny_store):
        retriever = Retriever(tiny_store, RetrievalConfig(candidate_k=5, final_k=2))
        ranked = await retriever.retrieve("port authority")
        assert ranked.chunk_ids[0] == "port#0"
        assert len(ranked) == 2

    @pytest.mark.asyncio
    async def test_no_candidates_gives_empty_list(self, tiny_store):
        retriever = Retriever(tiny_store)
        ranked = await retriever.retrieve("zebra")
        assert ranked.entries == []

    @pytest.mark.asyncio
    async def test_overlap_reranker_scores_coverage(self, tiny_store):
        reranker = OverlapReranker(build_lexical_index(tiny_store.iter_chunks()))
        scores = await reranker.score("alpha river", ["alpha river here", "only alpha", "nothing"])
        assert scores[0] == pytest.approx(1.0)
        assert 0.0 < scores[1] < 1.0
        assert scores[2] == 0.0

    @pytest.mark.asyncio
    async def test_overlap_rerank_matches_brute_force(self, tmp_path):
        rng = np.random.default_rng(7)
        docs = [
            {"doc_id": f"doc{i:02d}", "title": f"place {i}", "text": " ".join(rng.choice(FUZZ_VOCAB, size=6))}
            for i in range(12)
        ]
        store = CorpusStore()
        await store.ingest_corpus(write_lines(tmp_path / "corpus.jsonl", docs), ChunkingConfig())
        try:
            chunks = list(store.iter_chunks())
            candidates = RankedList.from_scores(
                "seed", [(c.chunk_id, float(len(chunks) - i)) for i, c in enumerate(chunks[:10])], 10
            )
            query = "bay cove harbor"
            ranked = await rerank(query, candidates, 4, OverlapReranker(build_lexical_index(chunks)), store)

            tokens = {c.chunk_id: set(chunk_tokens(c)) for c in chunks}
            n = len(chunks)

            def idf(term):
                df = sum(1 for present in tokens.values() if term in present)
                return math.log(1.0 + (n - df + 0.5) / (df + 0.5))

            terms = sorted(set(tokenize(query)))
            total = sum(idf(t) for t in terms)
            expected = {
                cid: sum(idf(t) for t in terms if t in tokens[cid]) / total for cid in candidates.chunk_ids
            }
            assert ranked.chunk_ids == sorted(expected, key=lambda cid: (-expected[cid], cid))[:4]
            for chunk_id, score in ranked.entries:
                assert score == pytest.approx(expected[chunk_id], rel=1e-12)
        finally:
            await store.close()

    @pytest.mark.asyncio
    async def test_fusion_needs_dense_scorer(self, tiny_store):
        with pytest.raises(ConfigError):
            Retriever(tiny_store, RetrievalConfig(fusion="rrf_fusion"))

    @pytest.mark.asyncio
    async def test_rrf_fusion_with_dense_scorer(self, tiny_store):
        def overlap(query, text):
            return float(len(set(tokenize(query)) & set(tokenize(text))))

        retriever = Retriever(tiny_store, RetrievalConfig(fusion="rrf_fusion", final_k=3), dense_scorer=overlap)
        ranked = await retriever.retrieve("desert lake")
        assert ranked.chunk_ids[0] == "lake#0"

    @pytest.mark.asyncio
    async def test_completion_reranker(self, tiny_store):
        backend = ScriptedBackend({"reranker": ["2", "Score: 9", "not a number"]})
        retriever = Retriever(tiny_store, RetrievalConfig(candidate_k=3, final_k=3),
                              reranker=CompletionReranker("reranker-model"))
        candidates = retriever.candidates("bay city port", retriever.config)
        ranked = await retriever.retrieve("bay city port", backend=backend)
        assert ranked.chunk_ids[0] == candidates.chunk_ids[1]
        assert ranked.entries[0][1] == 9.0
        assert ranked.entries[-1][1] == 0.0
        assert all(call.role_tag == "reranker" for call in backend.calls)

    @pytest.mark.asyncio
    async def test_reranker_failure_carries_candidates(self, tiny_store):
        def unavailable(req):
            raise BackendError("reranker unavailable")

        candidates = RankedList(query="bay", entries=[("city#0", 2.0), ("river#0", 1.0)])
        backend = ScriptedBackend({"reranker": unavailable})
        with pytest.raises(RerankError) as excinfo:
            await rerank("bay", candidates, 1, CompletionReranker("m"), tiny_store, backend=backend)
        assert excinfo.value.candidates == candidates

    @pytest.mark.asyncio
    async def test_unscripted_reranker_is_not_a_fallback(self, tiny_store):
        candidates = RankedList(query="bay", entries=[("city#0", 2.0), ("river#0", 1.0)])
        with pytest.raises(ScriptExhaustedError):
            await rerank("bay", candidates, 1, CompletionReranker("m"), tiny_store, backend=ScriptedBackend())

    @pytest.mark.asyncio
    async def test_rerank_requires_candidates(self, tiny_store):
        with pytest.raises(ValueError):
            await rerank("bay", RankedList(query="bay"), 1, OverlapReranker(build_lexical_index(tiny_store.iter_chunks())), tiny_store)
