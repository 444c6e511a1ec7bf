"""
Inverted index with Okapi BM25 scoring over chunk title + text.
"""

import hashlib
import logging
import math
import re
from collections import Counter
from typing import Dict, Iterable, List, Tuple

import numpy as np

from anchorchain.config import BM25_B, BM25_K1
from anchorchain.corpus.base import Chunk
from anchorchain.errors import DataError
from anchorchain.retrieval.base import RankedList

logger = logging.getLogger(__name__)

_PUNCTUATION = re.compile(r"[^\w\s]")
# Bumped whenever tokenize() changes; part of the index digest
TOKENIZER_VERSION = "lower-strip-punct-v1"


def tokenize(text: str) -> List[str]:
    """Lowercase, strip punctuation, split on whitespace."""
    return _PUNCTUATION.sub("", text.lower()).split()


def chunk_tokens(chunk: Chunk) -> List[str]:
    return tokenize(f"{chunk.title} {chunk.text}")


class LexicalIndex:
    """
    Immutable BM25 index. Postings hold (chunk positions, term frequencies)
    as numpy arrays; scoring accumulates per-term contributions in sorted
    term order so results are bit-reproducible.
    """

    def __init__(self, chunks: Iterable[Chunk], k1: float = BM25_K1, b: float = BM25_B):
        self.k1 = k1
        self.b = b
        self.chunk_ids: List[str] = []
        postings: Dict[str, Tuple[List[int], List[int]]] = {}
        lengths: List[int] = []
        for pos, chunk in enumerate(chunks):
            tokens = chunk_tokens(chunk)
            self.chunk_ids.append(chunk.chunk_id)
            lengths.append(len(tokens))
            for term, tf in sorted(Counter(tokens).items()):
                docs, tfs = postings.setdefault(term, ([], []))
                docs.append(pos)
                tfs.append(tf)
        if not self.chunk_ids:
            raise DataError("cannot build a lexical index over an empty corpus")

        self.n_docs = len(self.chunk_ids)
        self.doc_len = np.asarray(lengths, dtype=np.float64)
        # integer sum keeps avgdl independent of summation order
        self.avgdl = float(sum(lengths)) / self.n_docs
        self._postings = {
            term: (np.asarray(docs, dtype=np.int64), np.asarray(tfs, dtype=np.float64))
            for term, (docs, tfs) in postings.items()
        }
        # rank of each chunk id in ascending id order, for tie-breaking
        order = sorted(range(self.n_docs), key=lambda i: self.chunk_ids[i])
        self._id_rank = np.empty(self.n_docs, dtype=np.int64)
        self._id_rank[order] = np.arange(self.n_docs)
        logger.info(f"Lexical index built: {self.n_docs} chunks, {len(self._postings)} terms")

    def digest(self) -> str:
        """SHA-256 over tokenizer, BM25 parameters, chunk ids, lengths and postings."""
        h = hashlib.sha256(f"{TOKENIZER_VERSION}|k1={self.k1!r}|b={self.b!r}".encode("utf-8"))
        for chunk_id, length in zip(self.chunk_ids, self.doc_len.tolist()):
            h.update(f"\n{chunk_id}:{int(length)}".encode("utf-8"))
        for term in sorted(self._postings):
            docs, tfs = self._postings[term]
            h.update(f"\n{term}".encode("utf-8"))
            h.update(docs.tobytes())
            h.update(tfs.tobytes())
        return h.hexdigest()

    def document_frequency(self, term: str) -> int:
        posting = self._postings.get(term)
        return 0 if posting is None else len(posting[0])

    def idf(self, term: str) -> float:
        df = self.document_frequency(term)
        return math.log(1.0 + (self.n_docs - df + 0.5) / (df + 0.5))

    def scores(self, query: str) -> Tuple[np.ndarray, np.ndarray]:
        """BM25 score per chunk position and a mask of chunks matching any query term."""
        scores = np.zeros(self.n_docs, dtype=np.float64)
        matched = np.zeros(self.n_docs, dtype=bool)
        for term in sorted(set(tokenize(query))):
            posting = self._postings.get(term)
            if posting is None:
                continue
            docs, tf = posting
            idf = self.idf(term)
            norm = self.k1 * (1.0 - self.b + self.b * self.doc_len[docs] / self.avgdl)
            scores[docs] += idf * (tf * (self.k1 + 1.0)) / (tf + norm)
            matched[docs] = True
        return scores, matched

    def search(self, query: str, k: int) -> RankedList:
        """Top-k chunks by BM25; chunks sharing no token with the query are never returned."""
        if k < 1:
            raise ValueError("k must be at least 1")
        scores, matched = self.scores(query)
        hits = np.flatnonzero(matched)
        if hits.size == 0:
            return RankedList(query=query)
        order = np.lexsort((self._id_rank[hits], -scores[hits]))[:k]
        return RankedList(
            query=query,
            entries=[(self.chunk_ids[int(hits[i])], float(scores[hits[i]])) for i in order],
        )


def build_lexical_index(chunks: Iterable[Chunk]) -> LexicalIndex:
    return LexicalIndex(chunks)
