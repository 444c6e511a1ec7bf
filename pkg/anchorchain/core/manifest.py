"""
Run manifests: everything needed to re-execute a run and find its artifacts.
"""

import hashlib
import json
import uuid
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional

from pydantic import BaseModel, Field, ValidationError

from anchorchain.config import MANIFEST_VERSION
from anchorchain.errors import DataError

MANIFEST_FILE = "manifest.json"


def file_digest(path: str) -> str:
    """Lowercase hex SHA-256 of a file's bytes."""
    h = hashlib.sha256()
    try:
        with open(path, "rb") as f:
            for block in iter(lambda: f.read(1 << 16), b""):
                h.update(block)
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e
    return h.hexdigest()


def new_run_id(prefix: str = "run") -> str:
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
    return f"{prefix}-{stamp}-{uuid.uuid4().hex[:6]}"


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


class RunManifest(BaseModel):
    manifest_version: int = MANIFEST_VERSION
    run_id: str
    command: str
    settings: Dict[str, Any]
    dataset_path: str
    dataset_digest: str
    store_path: str
    corpus_path: Optional[str] = None
    corpus_digest: str
    index_digest: str
    truth_path: Optional[str] = None
    started_at: str = Field(default_factory=utc_now)
    finished_at: Optional[str] = None
    n_queries: int = 0
    n_aborted: int = 0
    artifacts: Dict[str, str] = Field(default_factory=dict)

    def write(self, run_dir: str) -> str:
        path = Path(run_dir) / MANIFEST_FILE
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.model_dump(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
        return str(path)

    @classmethod
    def load(cls, run_dir: str) -> "RunManifest":
        path = Path(run_dir) / MANIFEST_FILE
        try:
            return cls.model_validate_json(path.read_text(encoding="utf-8"))
        except OSError as e:
            raise DataError(f"no manifest in {run_dir}: {e}") from e
        except ValidationError as e:
            raise DataError(f"invalid manifest {path}: {e.errors()[0]['msg']}") from e
