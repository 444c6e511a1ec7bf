"""
Synthetic multi-hop corpora with planted gold chains.

Each query follows a chain of nonsense entities e_0 .. e_h. Gold document i
(titled "e_{i-1} e_i") states the link between consecutive entities. The
question names only e_0, so one retrieval on the question alone reaches the
first hop and the near-miss distractors that share e_0, never the later hops.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, NamedTuple, Set, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from anchorchain.config import ChunkingConfig
from anchorchain.corpus.base import SourceDocument
from anchorchain.corpus.chunking import chunk_document
from anchorchain.corpus.datasets import iter_jsonl, write_jsonl
from anchorchain.errors import DataError
from anchorchain.retrieval.lexical import build_lexical_index

logger = logging.getLogger(__name__)

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"
_SYLLABLES = 3

QUESTION_TEMPLATE = "Starting at {head}, where does the {hops}-step trail end?"
LINK_TEMPLATE = "{left} borders {right}."

# Words used by the templates; entity tokens must never collide with them
_RESERVED = {
    "starting", "at", "where", "does", "the", "trail", "end", "borders",
    "continues", "from", "to", "so", "answer", "is",
}


class ChainSpec(BaseModel):
    """Shape of a synthetic benchmark. ``hops_per_query`` values are assigned round-robin."""

    model_config = ConfigDict(frozen=True)

    n_queries: int = Field(ge=1)
    hops_per_query: List[int] = Field(default_factory=lambda: [2, 3, 4], min_length=1)
    distractors_per_gold: int = Field(default=5, ge=0)
    near_miss_rate: float = Field(default=0.6, ge=0.0, le=1.0)
    seed: int = 0

    @field_validator("hops_per_query", mode="before")
    @classmethod
    def _as_list(cls, value: Union[int, List[int]]) -> List[int]:
        return [value] if isinstance(value, int) else value

    @field_validator("hops_per_query")
    @classmethod
    def _hop_range(cls, value: List[int]) -> List[int]:
        if any(h < 2 or h > 4 for h in value):
            raise ValueError("hops must be between 2 and 4")
        return value

    def hops_for(self, index: int) -> int:
        return self.hops_per_query[index % len(self.hops_per_query)]


class TruthRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    qid: str
    chain: List[str] = Field(min_length=3)
    gold_doc_ids: List[str]
    answer: str

    @property
    def n_required(self) -> int:
        return len(self.chain) - 1

    @property
    def titles(self) -> List[str]:
        """Gold titles in hop order; also the queries that retrieve them."""
        return [f"{a} {b}" for a, b in zip(self.chain, self.chain[1:])]


class SyntheticTruth:
    """qid -> TruthRecord, in generation order."""

    def __init__(self, records: List[TruthRecord]):
        self.records: Dict[str, TruthRecord] = {r.qid: r for r in records}

    def __getitem__(self, qid: str) -> TruthRecord:
        return self.records[qid]

    def __contains__(self, qid: object) -> bool:
        return qid in self.records

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records.values())

    @classmethod
    def load(cls, path: str) -> "SyntheticTruth":
        records = []
        for lineno, raw in iter_jsonl(path):
            try:
                records.append(TruthRecord.model_validate(raw))
            except ValueError as e:
                raise DataError(f"invalid truth record: {e}", line=lineno, path=path) from e
        return cls(records)


class SyntheticPaths(NamedTuple):
    corpus: str
    qa: str
    truth: str


class _TokenSource:
    """Corpus-unique pronounceable tokens drawn from a seeded generator."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.used: Set[str] = set(_RESERVED)

    def draw(self) -> str:
        while True:
            c = self.rng.integers(0, len(_CONSONANTS), size=_SYLLABLES)
            v = self.rng.integers(0, len(_VOWELS), size=_SYLLABLES)
            token = "".join(_CONSONANTS[i] + _VOWELS[j] for i, j in zip(c, v))
            if token not in self.used:
                self.used.add(token)
                return token


def _link_doc(doc_id: str, left: str, right: str) -> Dict[str, str]:
    return {"doc_id": doc_id, "title": f"{left} {right}", "text": LINK_TEMPLATE.format(left=left, right=right)}


def build_benchmark(spec: ChainSpec):
    """(corpus records, QA records, truth records) for ``spec``; pure and deterministic."""
    rng = np.random.default_rng(spec.seed)
    tokens = _TokenSource(rng)
    corpus: List[Dict[str, str]] = []
    qa: List[Dict[str, object]] = []
    truth: List[TruthRecord] = []

    for index in range(spec.n_queries):
        qid = f"syn-{index:04d}"
        hops = spec.hops_for(index)
        chain = [tokens.draw() for _ in range(hops + 1)]

        # gold ids sort before distractor ids of the same query
        gold_ids = [f"{qid}-g{i}" for i in range(1, hops + 1)]
        for i, doc_id in enumerate(gold_ids, start=1):
            corpus.append(_link_doc(doc_id, chain[i - 1], chain[i]))

        total = spec.distractors_per_gold * hops
        near_miss = int(round(total * spec.near_miss_rate))
        for j in range(near_miss):
            corpus.append(_link_doc(f"{qid}-x{j:02d}", chain[0], tokens.draw()))
        for j in range(total - near_miss):
            bridge = chain[1 + j % hops]
            corpus.append(_link_doc(f"{qid}-y{j:02d}", bridge, tokens.draw()))

        qa.append({
            "qid": qid,
            "question": QUESTION_TEMPLATE.format(head=chain[0], hops=hops),
            "answer": chain[-1],
            "gold_doc_ids": gold_ids,
            "n_required": hops,
        })
        truth.append(TruthRecord(qid=qid, chain=chain, gold_doc_ids=gold_ids, answer=chain[-1]))

    order = rng.permutation(len(corpus))
    corpus = [corpus[i] for i in order]
    return corpus, qa, truth


def verify_gold_retrievable(corpus: List[Dict[str, str]], truth: List[TruthRecord]) -> None:
    """Every gold document must rank first for a query equal to its title."""
    chunks = []
    for raw in corpus:
        doc = SourceDocument(doc_id=raw["doc_id"], title=raw["title"], body=raw["text"])
        chunks.extend(chunk_document(doc, ChunkingConfig()))
    index = build_lexical_index(chunks)
    for record in truth:
        for title, doc_id in zip(record.titles, record.gold_doc_ids):
            top = index.search(title, 1).chunk_ids
            if not top or top[0].rpartition("#")[0] != doc_id:
                raise DataError(f"{record.qid}: gold document {doc_id} is not rank 1 for {title!r}")


def generate(spec: ChainSpec, out_dir: str, check: bool = True) -> SyntheticPaths:
    """Write corpus.jsonl, qa.jsonl and truth.jsonl under ``out_dir``."""
    corpus, qa, truth = build_benchmark(spec)
    if check:
        verify_gold_retrievable(corpus, truth)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = SyntheticPaths(str(out / "corpus.jsonl"), str(out / "qa.jsonl"), str(out / "truth.jsonl"))
    write_jsonl(paths.corpus, corpus)
    write_jsonl(paths.qa, qa)
    with open(paths.truth, "w", encoding="utf-8") as f:
        for record in truth:
            f.write(json.dumps(record.model_dump(), ensure_ascii=False) + "\n")

    hist = np.bincount([r.n_required for r in truth], minlength=5)[2:].tolist()
    logger.info(
        f"Generated {len(qa)} queries over {len(corpus)} documents "
        f"(2/3/4-hop: {hist}, seed {spec.seed}) in {out_dir}"
    )
    return paths
