"""
Synthetic multi-hop benchmark with planted gold chains and oracle agents.
"""

from .generator import ChainSpec, SyntheticTruth, TruthRecord, build_benchmark, generate
from .oracle import oracle_agents

__all__ = [
    'ChainSpec',
    'SyntheticTruth',
    'TruthRecord',
    'build_benchmark',
    'generate',
    'oracle_agents',
]
