"""
anchorchain - two-stage multi-hop retrieval-augmented question answering
"""

import logging

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

# Core exports
from .core import Pipeline, RunTrace, create_backend, create_pipeline, run_batch
from .corpus import CorpusStore, QARecord, load_qa_set

__all__ = [
    'CorpusStore',
    'Pipeline',
    'QARecord',
    'RunTrace',
    'create_backend',
    'create_pipeline',
    'load_qa_set',
    'run_batch',
]
