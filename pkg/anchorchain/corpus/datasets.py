"""
Line-delimited record files: corpus documents and QA datasets.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple

from pydantic import BaseModel, Field, ValidationError, model_validator

from anchorchain.errors import DataError

logger = logging.getLogger(__name__)


class QARecord(BaseModel):
    """One multi-hop question with its answer and supporting documents."""

    qid: str = Field(min_length=1)
    question: str = Field(min_length=1)
    answer: str
    gold_doc_ids: List[str] = Field(min_length=1)
    n_required: Optional[int] = None

    @model_validator(mode="after")
    def _default_required_length(self) -> "QARecord":
        if self.n_required is None:
            self.n_required = len(self.gold_doc_ids)
        elif self.n_required < 1:
            raise ValueError("n_required must be at least 1")
        return self


def iter_jsonl(path: str) -> Iterator[Tuple[int, Dict[str, Any]]]:
    """Yield (line number, object) pairs; blank lines are skipped."""
    try:
        handle = open(path, "r", encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e
    with handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"malformed record ({e.msg})", line=lineno, path=path) from e
            if not isinstance(record, dict):
                raise DataError("record is not an object", line=lineno, path=path)
            yield lineno, record


def load_qa_set(path: str) -> List[QARecord]:
    """Load a QA dataset file, keeping file order."""
    records: List[QARecord] = []
    seen = set()
    for lineno, raw in iter_jsonl(path):
        try:
            record = QARecord.model_validate(raw)
        except ValidationError as e:
            raise DataError(f"invalid QA record: {e.errors()[0]['msg']}", line=lineno, path=path) from e
        if record.qid in seen:
            raise DataError(f"duplicate qid {record.qid!r}", line=lineno, path=path)
        seen.add(record.qid)
        records.append(record)
    logger.info(f"Loaded {len(records)} QA records from {Path(path).name}")
    return records


def write_jsonl(path: str, records: List[Dict[str, Any]]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record, ensure_ascii=False) + "\n")
