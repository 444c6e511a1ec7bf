import json
import os
import sys

import pytest
import pytest_asyncio

# Add the project root to sys.path
# This ensures that 'anchorchain' can be imported by tests regardless of where pytest is run from
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from anchorchain.config import ChunkingConfig  # noqa: E402
from anchorchain.corpus.store import CorpusStore  # noqa: E402

TINY_DOCS = [
    {"doc_id": "river", "title": "Alpha river", "text": "The alpha river flows north into the bay."},
    {"doc_id": "city", "title": "Bay city", "text": "Bay city sits at the mouth of the bay and hosts a port."},
    {"doc_id": "port", "title": "Port authority", "text": "The port authority of bay city was founded by Mira Tal."},
    {"doc_id": "pass", "title": "Mountain pass", "text": "A mountain pass crosses the northern range."},
    {"doc_id": "lake", "title": "Desert lake", "text": "A salt lake lies in the desert basin."},
]


def write_lines(path, records):
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record) + "\n")
    return str(path)


@pytest.fixture
def tiny_corpus_path(tmp_path):
    return write_lines(tmp_path / "corpus.jsonl", TINY_DOCS)


@pytest_asyncio.fixture
async def tiny_store(tiny_corpus_path):
    store = CorpusStore()
    await store.ingest_corpus(tiny_corpus_path, ChunkingConfig())
    yield store
    await store.close()
