"""
anchorchain core - agent runtime, the control loop and batch execution
"""

from .backends import CompletionBackend, RecordingBackend, RemoteBackend, ScriptedBackend, TranscriptBackend
from .factory import create_backend, create_pipeline, create_retriever
from .pipeline import Pipeline
from .runner import load_traces, replay_trace, run_batch
from .trace import HopRecord, RunTrace

__all__ = [
    'CompletionBackend',
    'HopRecord',
    'Pipeline',
    'RecordingBackend',
    'RemoteBackend',
    'RunTrace',
    'ScriptedBackend',
    'TranscriptBackend',
    'create_backend',
    'create_pipeline',
    'create_retriever',
    'load_traces',
    'replay_trace',
    'run_batch',
]
