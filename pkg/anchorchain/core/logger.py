import json
import logging
import os
from datetime import datetime
from typing import Any, Dict, Optional

from anchorchain.config import LOG_DIRECTORY

AGENT_LOGGER_NAME = "anchorchain.agents"


def setup_run_logger(run_id: str, log_dir: str = LOG_DIRECTORY) -> logging.Logger:
    """Attach a per-run log file to the agent-action logger.

    Args:
        run_id: Identifier of the run; used in the file name.
        log_dir: Directory receiving ``<run_id>_<timestamp>.log``.
    """
    os.makedirs(log_dir, exist_ok=True)

    logger = logging.getLogger(AGENT_LOGGER_NAME)
    logger.setLevel(logging.INFO)

    # Prevent duplicate handlers for the same run
    tag = f"run:{run_id}"
    if any(getattr(h, "_anchorchain_run", None) == tag for h in logger.handlers):
        return logger

    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    log_file = os.path.join(log_dir, f"{run_id}_{timestamp}.log")
    fh = logging.FileHandler(log_file, encoding='utf-8')
    fh.setLevel(logging.INFO)
    fh.setFormatter(logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s'))
    fh._anchorchain_run = tag
    logger.addHandler(fh)

    return logger


def close_run_logger(run_id: str) -> None:
    """Detach and close the file handler added by setup_run_logger."""
    logger = logging.getLogger(AGENT_LOGGER_NAME)
    tag = f"run:{run_id}"
    for handler in list(logger.handlers):
        if getattr(handler, "_anchorchain_run", None) == tag:
            logger.removeHandler(handler)
            handler.close()


def log_agent_action(agent: str, action: str, details: str,
                     metadata: Optional[Dict[str, Any]] = None,
                     level: int = logging.INFO) -> None:
    """Log one agent action as a structured JSON record.

    Args:
        agent: The agent role (e.g., "planner", "esc", "writer", "judge").
        action: What happened (e.g., "plan", "decision", "fallback").
        details: Short human-readable description.
        metadata: Additional JSON-serializable fields (qid, hop, query...).
    """
    entry = {
        "agent": agent,
        "action": action,
        "details": details,
        "timestamp": datetime.now().isoformat(),
        "metadata": metadata or {},
    }
    logging.getLogger(AGENT_LOGGER_NAME).log(
        level, f"AGENT_ACTION: {json.dumps(entry, ensure_ascii=False, default=str)}"
    )


def log_decision(qid: str, hop: int, action: str, next_query: Optional[str], message: str) -> None:
    """Log an evidence-sufficiency decision."""
    log_agent_action(
        agent="esc",
        action="decision",
        details=f"Decision: {action}",
        metadata={"qid": qid, "hop": hop, "next_query": next_query, "message": message},
    )


def log_run_start(run_id: str, purpose: str, metadata: Optional[Dict[str, Any]] = None) -> None:
    log_agent_action("runner", "run_start", f"Run started: {purpose}", {"run_id": run_id, **(metadata or {})})


def log_run_end(run_id: str, summary: str, metadata: Optional[Dict[str, Any]] = None) -> None:
    log_agent_action("runner", "run_end", f"Run ended: {summary}", {"run_id": run_id, **(metadata or {})})
