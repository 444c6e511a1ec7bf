"""Model-scored reranking: one completion call per candidate, 0-10 relevance."""

import logging
from typing import List, Optional, Sequence

from anchorchain.config import RERANKER_MODEL
from anchorchain.core.backends import CompletionBackend
from anchorchain.core.models import CompletionRequest, Decoding
from anchorchain.core.parsers import parse_rerank_score
from anchorchain.core.prompts import render_reranker_prompt
from anchorchain.errors import BackendError
from anchorchain.retrieval.rerank import Reranker

logger = logging.getLogger(__name__)


class CompletionReranker(Reranker):
    """
    Asks the reranker model for an integer relevance score per passage.
    Calls are sequential so the recorded transcript order is stable.
    """

    def __init__(self, model_id: str = RERANKER_MODEL, decoding: Optional[Decoding] = None,
                 backend: Optional[CompletionBackend] = None):
        self.model_id = model_id
        self.decoding = decoding or Decoding()
        self.backend = backend

    async def score(self, query: str, texts: Sequence[str], backend=None) -> List[float]:
        backend = backend or self.backend
        if backend is None:
            raise BackendError("completion reranker has no backend")
        scores: List[float] = []
        for text in texts:
            prompt = render_reranker_prompt(query, text)
            result = await backend.complete(CompletionRequest(
                role_tag="reranker",
                system_prompt=prompt.system,
                user_prompt=prompt.user,
                model_id=self.model_id,
                decoding=self.decoding,
                prompt_name=prompt.name,
            ))
            scores.append(parse_rerank_score(result.text))
        logger.debug(f"Reranked {len(texts)} passages for {query[:60]!r}")
        return scores
