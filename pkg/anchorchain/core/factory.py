"""
Factory functions wiring Settings into backends, retrievers and pipelines.
"""

import logging
import os
from typing import Optional

from anchorchain.config import API_KEY_ENV, Settings
from anchorchain.core.backends import CompletionBackend, RemoteBackend
from anchorchain.core.cache import ResponseCache
from anchorchain.core.models import Decoding
from anchorchain.core.pipeline import Pipeline
from anchorchain.core.reranking import CompletionReranker
from anchorchain.corpus.store import CorpusStore
from anchorchain.errors import ConfigError
from anchorchain.retrieval.dense import create_embedding_scorer
from anchorchain.retrieval.retriever import Retriever

logger = logging.getLogger(__name__)


def decoding_from(settings: Settings) -> Decoding:
    return Decoding(
        temperature=settings.temperature,
        max_tokens=settings.max_tokens,
        reasoning_effort=settings.reasoning_effort,
    )


def create_backend(settings: Settings, truth=None) -> CompletionBackend:
    """
    Build the completion backend named by ``settings.backend``.

    Args:
        settings: Resolved run settings.
        truth: Synthetic ground truth; required for the oracle backend.
    """
    if settings.backend == "oracle":
        if truth is None:
            raise ConfigError("the oracle backend needs a truth file (--truth)")
        from anchorchain.synthetic.oracle import oracle_agents
        logger.info(f"Using oracle agents over {len(truth)} synthetic queries")
        return oracle_agents(truth)

    api_key = settings.api_key or os.getenv(API_KEY_ENV)
    cache = ResponseCache(settings.cache_path) if settings.cache_path else None
    logger.info(f"Using remote backend at {settings.base_url} (cache: {settings.cache_path or 'off'})")
    return RemoteBackend(
        base_url=settings.base_url,
        api_key=api_key,
        cache=cache,
        max_retries=settings.max_retries,
        max_in_flight=settings.max_in_flight,
        rate_limit_per_second=settings.rate_limit_per_second,
    )


def create_retriever(store: CorpusStore, settings: Settings) -> Retriever:
    cfg = settings.pipeline.retrieval
    reranker = None
    if cfg.reranker == "completion":
        reranker = CompletionReranker(settings.reranker_model, decoding_from(settings))
    dense_scorer = None
    if cfg.fusion == "rrf_fusion":
        dense_scorer = create_embedding_scorer()
    return Retriever(store, cfg, reranker=reranker, dense_scorer=dense_scorer)


def create_pipeline(
    store: CorpusStore,
    settings: Settings,
    backend: CompletionBackend,
    retriever: Optional[Retriever] = None,
) -> Pipeline:
    """A Pipeline for ``settings.pipeline``; pass ``retriever`` to reuse a built index."""
    retriever = retriever or create_retriever(store, settings)
    logger.info(
        f"Pipeline: variant={settings.pipeline.variant} m={settings.pipeline.m} H={settings.pipeline.H} "
        f"fusion={settings.pipeline.retrieval.fusion} reranker={settings.pipeline.retrieval.reranker}"
    )
    return Pipeline(
        store,
        retriever,
        backend,
        settings.pipeline,
        agent_model=settings.agent_model,
        generation_model=settings.writer_model,
        controller_model=settings.controller_model,
        decoding=decoding_from(settings),
    )
