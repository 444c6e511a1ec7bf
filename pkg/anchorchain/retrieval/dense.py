"""
Optional dense scoring leg: any (query, chunk text) -> float callable.
"""

import logging
from functools import lru_cache
from typing import Callable

import numpy as np

from anchorchain.config import EMBEDDER_MODEL
from anchorchain.errors import ConfigError

logger = logging.getLogger(__name__)

DenseScorer = Callable[[str, str], float]


def create_embedding_scorer(model_name: str = EMBEDDER_MODEL) -> DenseScorer:
    """
    Cosine-similarity scorer backed by sentence-transformers.
    The package is optional and imported only when this scorer is requested.
    """
    try:
        from sentence_transformers import SentenceTransformer
    except ImportError as e:
        raise ConfigError("sentence-transformers is required for the embedding scorer") from e

    logger.info(f"Loading embedding model {model_name}")
    model = SentenceTransformer(model_name)

    @lru_cache(maxsize=65536)
    def embed(text: str) -> np.ndarray:
        return model.encode(text, normalize_embeddings=True)

    def score(query: str, text: str) -> float:
        return float(np.dot(embed(query), embed(text)))

    return score
