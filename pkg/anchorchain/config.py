"""
Centralized configuration for anchorchain.
All constants, model names, and configurable values in one place.
"""

import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from dotenv import dotenv_values, load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from anchorchain.errors import ConfigError

# Load environment variables
load_dotenv()

# =============================================================================
# API Configuration
# =============================================================================

# Application Name
APP_NAME = "anchorchain"

# The API key is the only secret and only ever comes from the environment
API_KEY_ENV = "ANCHORCHAIN_API_KEY"
DEFAULT_BASE_URL = os.getenv("ANCHORCHAIN_BASE_URL", "https://api.openai.com/v1")

# =============================================================================
# Model Configuration
# =============================================================================

# Reasoning agents: planner and formulator (and the writer unless a generation model is set)
DEFAULT_MODEL = os.getenv("ANCHORCHAIN_MODEL", "gpt-4.1")
# Writer and no-retrieval baselines; unset means DEFAULT_MODEL
GENERATION_MODEL = os.getenv("ANCHORCHAIN_GENERATION_MODEL") or None
# Evidence sufficiency controller
CONTROLLER_MODEL = os.getenv("ANCHORCHAIN_CONTROLLER_MODEL", "o4-mini")
JUDGE_MODEL = os.getenv("ANCHORCHAIN_JUDGE_MODEL", "gpt-5-mini")
RERANKER_MODEL = os.getenv("ANCHORCHAIN_RERANKER_MODEL", "o4-mini")

# Decoding is greedy by default so traces are reproducible
DEFAULT_TEMPERATURE = 0.0
DEFAULT_MAX_OUTPUT_TOKENS = 1024
# Passed through only when set, for models with a reasoning mode
DEFAULT_REASONING_EFFORT = os.getenv("ANCHORCHAIN_REASONING_EFFORT") or None
ReasoningEffort = Literal["none", "minimal", "low", "medium", "high"]

# Optional dense scorer (sentence-transformers)
EMBEDDER_MODEL = "all-MiniLM-L6-v2"

# =============================================================================
# Backend Behaviour
# =============================================================================

REQUEST_TIMEOUT_SECONDS = 120.0
MAX_RETRIES = 4
RETRY_BASE_DELAY = 2.0
MAX_IN_FLIGHT = 8
RATE_LIMIT_PER_SECOND = 5.0
RATE_LIMIT_BURST = 5
DEFAULT_CACHE_PATH = "instance/completion_cache.db"

# =============================================================================
# Corpus / Retrieval Configuration
# =============================================================================

CHUNK_MAX_CHARS = 1200
CHUNK_OVERLAP_CHARS = 120
CHUNK_SPLIT_ON_BOUNDARIES = True

BM25_K1 = 1.2
BM25_B = 0.75

# Broad candidate stage; 500 is the alternative broad setting
CANDIDATE_K = 100
FINAL_K = 5
RRF_CONSTANT = 60.0

# =============================================================================
# Pipeline Configuration
# =============================================================================

DEFAULT_STEPS = 5  # both sub-query count m and hop budget H
CONTEXT_CHAR_CAP = 24000
ABLATION_STEPS = [3, 5, 7, 10]

# =============================================================================
# Artifact Schema Versions
# =============================================================================

TRACE_VERSION = 1
METRICS_VERSION = 1
REPORT_VERSION = 1
MANIFEST_VERSION = 1

# =============================================================================
# Logging Configuration
# =============================================================================

LOG_DIRECTORY = "agent_logs"
PROMPT_DIRECTORY = Path(__file__).parent / "core" / "agents" / "prompts"


Variant = Literal[
    "par2rag",
    "coverage_anchor_only",
    "iterative_chain_only",
    "interleaved_ircot_style",
    "cot_no_retrieval",
    "direct",
    "single_shot",
]
VARIANTS: List[str] = list(Variant.__args__)  # type: ignore[attr-defined]


class ChunkingConfig(BaseModel):
    """How documents are split into chunks."""

    model_config = ConfigDict(frozen=True)

    max_chars: int = Field(default=CHUNK_MAX_CHARS, gt=0)
    overlap_chars: int = Field(default=CHUNK_OVERLAP_CHARS, ge=0)
    split_on_boundaries: bool = CHUNK_SPLIT_ON_BOUNDARIES

    @model_validator(mode="after")
    def _overlap_below_max(self) -> "ChunkingConfig":
        if self.overlap_chars >= self.max_chars:
            raise ValueError("overlap_chars must be smaller than max_chars")
        return self


class RetrievalConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    candidate_k: int = Field(default=CANDIDATE_K, gt=0)
    final_k: int = Field(default=FINAL_K, gt=0)
    fusion: Literal["lexical_only", "rrf_fusion"] = "lexical_only"
    rrf_constant: float = Field(default=RRF_CONSTANT, gt=0)
    reranker: Literal["overlap", "completion"] = "overlap"

    @model_validator(mode="after")
    def _final_within_candidates(self) -> "RetrievalConfig":
        if self.final_k > self.candidate_k:
            raise ValueError("final_k must not exceed candidate_k")
        return self


class PipelineConfig(BaseModel):
    """Variant, budgets and retrieval settings for one pipeline run."""

    model_config = ConfigDict(frozen=True)

    variant: Variant = "par2rag"
    m: int = Field(default=DEFAULT_STEPS, ge=1)
    H: int = Field(default=DEFAULT_STEPS, ge=1)
    retrieval: RetrievalConfig = Field(default_factory=RetrievalConfig)
    context_char_cap: int = Field(default=CONTEXT_CHAR_CAP, gt=0)
    separate_formulator: bool = False

    def with_steps(self, steps: int) -> "PipelineConfig":
        """One knob for both the sub-query count and the hop budget."""
        return self.model_copy(update={"m": steps, "H": steps})


class Settings(BaseModel):
    """Fully resolved run configuration: defaults < config file < CLI flags."""

    model_config = ConfigDict(frozen=True)

    pipeline: PipelineConfig = Field(default_factory=PipelineConfig)
    chunking: ChunkingConfig = Field(default_factory=ChunkingConfig)
    backend: Literal["remote", "oracle"] = "remote"
    base_url: str = DEFAULT_BASE_URL
    agent_model: str = DEFAULT_MODEL
    generation_model: Optional[str] = GENERATION_MODEL
    controller_model: str = CONTROLLER_MODEL
    judge_model: str = JUDGE_MODEL
    reranker_model: str = RERANKER_MODEL
    temperature: float = Field(default=DEFAULT_TEMPERATURE, ge=0)
    max_tokens: int = Field(default=DEFAULT_MAX_OUTPUT_TOKENS, gt=0)
    reasoning_effort: Optional[ReasoningEffort] = DEFAULT_REASONING_EFFORT
    max_retries: int = Field(default=MAX_RETRIES, ge=1)
    max_in_flight: int = Field(default=MAX_IN_FLIGHT, ge=1)
    rate_limit_per_second: float = Field(default=RATE_LIMIT_PER_SECOND, gt=0)
    cache_path: Optional[str] = DEFAULT_CACHE_PATH
    api_key: Optional[str] = Field(default=None, exclude=True, repr=False)

    @property
    def writer_model(self) -> str:
        return self.generation_model or self.agent_model

    def redacted(self) -> Dict[str, Any]:
        """Snapshot safe to persist: the API key is never included."""
        return self.model_dump(mode="json")


# Flat config-file keys -> where they live in Settings
_PIPELINE_KEYS = {"variant", "m", "H", "context_char_cap", "separate_formulator"}
_RETRIEVAL_KEYS = {"candidate_k", "final_k", "fusion", "rrf_constant", "reranker"}
_CHUNKING_KEYS = {"max_chars", "overlap_chars", "split_on_boundaries"}
_TOP_KEYS = set(Settings.model_fields) - {"pipeline", "chunking", "api_key"}


def _coerce(value: Optional[str]) -> Any:
    """Config-file values are strings; let pydantic coerce, but map blanks to None."""
    if value is None or value.strip() == "":
        return None
    return value.strip()


def read_config_file(path: str) -> Dict[str, Any]:
    """Read a KEY=VALUE config file without touching os.environ."""
    if not Path(path).is_file():
        raise ConfigError(f"config file not found: {path}")
    raw = dotenv_values(path)
    return {key.strip(): _coerce(value) for key, value in raw.items()}


def build_settings(values: Dict[str, Any], base: Optional[Settings] = None) -> Settings:
    """Layer flat key/value overrides on top of ``base`` (module defaults if absent)."""
    base = base or Settings(api_key=os.getenv(API_KEY_ENV))
    pipeline = base.pipeline.model_dump()
    retrieval = pipeline.pop("retrieval")
    chunking = base.chunking.model_dump()
    top = base.model_dump(exclude={"pipeline", "chunking"})

    for key, value in values.items():
        if value is None:
            continue
        if key == "steps":
            pipeline["m"] = pipeline["H"] = value
        elif key in _PIPELINE_KEYS:
            pipeline[key] = value
        elif key in _RETRIEVAL_KEYS:
            retrieval[key] = value
        elif key in _CHUNKING_KEYS:
            chunking[key] = value
        elif key in _TOP_KEYS:
            top[key] = value
        else:
            raise ConfigError(f"unknown configuration key: {key}")

    try:
        return Settings(
            pipeline=PipelineConfig(retrieval=RetrievalConfig(**retrieval), **pipeline),
            chunking=ChunkingConfig(**chunking),
            api_key=base.api_key,
            **top,
        )
    except ValidationError as e:
        raise ConfigError(f"invalid configuration: {e}") from e


def load_settings(config_path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> Settings:
    """Resolve settings from module defaults, an optional config file, then overrides."""
    settings = build_settings({})
    if config_path:
        settings = build_settings(read_config_file(config_path), settings)
    if overrides:
        settings = build_settings(overrides, settings)
    return settings
