"""
Corpus layer: documents, chunking, the chunk store and QA datasets.
"""

from .base import Chunk, CorpusStats, SourceDocument, make_chunk_id, parent_doc_id
from .chunking import chunk_document
from .datasets import QARecord, iter_jsonl, load_qa_set, write_jsonl
from .store import CorpusStore

__all__ = [
    'Chunk',
    'CorpusStats',
    'CorpusStore',
    'QARecord',
    'SourceDocument',
    'chunk_document',
    'iter_jsonl',
    'load_qa_set',
    'make_chunk_id',
    'parent_doc_id',
    'write_jsonl',
]
