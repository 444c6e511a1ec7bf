"""
Evaluation artifacts: per-query metric files, report files, and plain-text /
machine-readable tables for single runs and step ablations.
"""

import json
import logging
from collections import Counter
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np
from pydantic import BaseModel

from anchorchain.config import JUDGE_MODEL, REPORT_VERSION
from anchorchain.core.backends import CompletionBackend
from anchorchain.core.trace import RunTrace
from anchorchain.corpus.datasets import QARecord
from anchorchain.corpus.store import CorpusStore
from anchorchain.errors import DataError
from anchorchain.evaluation.judge import judge_traces
from anchorchain.evaluation.metrics import METRIC_NAMES, MetricReport, aggregate, judgment_from_trace

logger = logging.getLogger(__name__)

MISSING_CELL = "n/a"


def _check_coverage(traces: Mapping[str, RunTrace], records: Sequence[QARecord]) -> None:
    wanted = [r.qid for r in records]
    missing = [qid for qid in wanted if qid not in traces]
    if missing:
        raise DataError(f"{len(missing)} qids have no trace: {', '.join(missing)}")
    extra = sorted(set(traces) - set(wanted))
    if extra:
        raise DataError(f"{len(extra)} traces have no QA record: {', '.join(extra)}")


async def evaluate(
    traces: Mapping[str, RunTrace],
    records: Sequence[QARecord],
    store: CorpusStore,
    judge_backend: CompletionBackend,
    judge_model: str = JUDGE_MODEL,
    concurrency: int = 4,
) -> MetricReport:
    """Judge every answer and score every trace's retrieval against the QA set."""
    _check_coverage(traces, records)
    by_qid = {r.qid: r for r in records}
    ordered = [traces[r.qid] for r in records]
    bits, unparsed = await judge_traces(ordered, by_qid, judge_backend, judge_model, concurrency)
    judgments = [judgment_from_trace(t, by_qid[t.qid], store) for t in ordered]
    return aggregate(judgments, bits, unparsed)


def run_diagnostics(traces: Sequence[RunTrace]) -> Dict[str, Any]:
    """Stop reasons, flags and loop usage across a run."""
    hops = np.array([len(t.hops) for t in traces], dtype=np.float64)
    loops = np.array([t.loop_retrievals for t in traces], dtype=np.float64)
    flags = Counter(flag for t in traces for flag in t.flags)
    return {
        "stop_reasons": dict(sorted(Counter(t.stop_reason for t in traces).items())),
        "flags": dict(sorted(flags.items())),
        "queries_with_errors": sum(1 for t in traces if t.errors),
        "mean_hops": float(hops.mean()) if len(hops) else 0.0,
        "mean_loop_retrievals": float(loops.mean()) if len(loops) else 0.0,
    }


def write_per_query(report: MetricReport, path: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for qid in sorted(report.per_query):
            row = {"metrics_version": report.metrics_version, **report.per_query[qid].model_dump()}
            f.write(json.dumps(row, ensure_ascii=False) + "\n")


def report_document(
    report: MetricReport,
    diagnostics: Optional[Dict[str, Any]] = None,
    context: Optional[Dict[str, Any]] = None,
) -> Dict[str, Any]:
    """The report file body; ``context`` names the method and dataset for comparison tables."""
    return {
        "report_version": REPORT_VERSION,
        "context": context or {},
        "metrics_version": report.metrics_version,
        "n_queries": report.n_queries,
        "aggregates": report.aggregates,
        "by_required_length": {
            str(n): group.model_dump() for n, group in sorted(report.by_required_length.items())
        },
        "judge_unparsed": report.judge_unparsed,
        "diagnostics": diagnostics or {},
    }


def write_report(
    report: MetricReport,
    path: str,
    diagnostics: Optional[Dict[str, Any]] = None,
    context: Optional[Dict[str, Any]] = None,
) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report_document(report, diagnostics, context), f, indent=2, ensure_ascii=False)
        f.write("\n")


def load_report(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"cannot read report {path}: {e}") from e


# --- Plain-text tables ---

def render_table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [len(h) for h in header]
    for row in rows:
        widths = [max(w, len(cell)) for w, cell in zip(widths, row)]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(header, widths)),
        "  ".join("-" * w for w in widths),
    ]
    lines.extend("  ".join(cell.ljust(w) for cell, w in zip(row, widths)) for row in rows)
    return "\n".join(lines)


def _fmt(value: Optional[float]) -> str:
    return MISSING_CELL if value is None else f"{value:.3f}"


def render_report(document: Mapping[str, Any], title: str = "") -> str:
    """Aggregates plus the per-required-length breakdown of one report document."""
    header = ["group", "n"] + list(METRIC_NAMES)
    rows = [["all", str(document["n_queries"])] + [_fmt(document["aggregates"][m]) for m in METRIC_NAMES]]
    for n, group in sorted(document["by_required_length"].items(), key=lambda kv: int(kv[0])):
        rows.append([f"{n}-hop", str(group["count"])] + [_fmt(group[m]) for m in METRIC_NAMES])
    table = render_table(header, rows)
    return f"{title}\n{table}" if title else table


# --- Ablations ---

class AblationCell(BaseModel):
    variant: str
    steps: int
    aggregates: Optional[Dict[str, float]] = None
    error: Optional[str] = None
    trace_path: Optional[str] = None
    report_path: Optional[str] = None


def ablation_stability(cells: Sequence[AblationCell]) -> Dict[str, Dict[str, Dict[str, float]]]:
    """Per variant and metric: mean and population std across the completed step settings."""
    stability: Dict[str, Dict[str, Dict[str, float]]] = {}
    for variant in dict.fromkeys(c.variant for c in cells):
        done = [c for c in cells if c.variant == variant and c.aggregates is not None]
        if not done:
            continue
        stability[variant] = {}
        for metric in METRIC_NAMES:
            values = np.array([c.aggregates[metric] for c in done], dtype=np.float64)
            stability[variant][metric] = {"mean": float(values.mean()), "std": float(values.std())}
    return stability


def ablation_document(cells: Sequence[AblationCell], steps: Sequence[int]) -> Dict[str, Any]:
    return {
        "report_version": REPORT_VERSION,
        "steps": list(steps),
        "cells": [c.model_dump() for c in cells],
        "stability": ablation_stability(cells),
    }


def render_ablation(cells: Sequence[AblationCell], steps: Sequence[int]) -> str:
    """One block per metric: variants as rows, step counts as columns; failed cells show n/a."""
    by_key = {(c.variant, c.steps): c for c in cells}
    variants = list(dict.fromkeys(c.variant for c in cells))
    blocks: List[str] = []
    for metric in METRIC_NAMES:
        header = [metric] + [f"steps={s}" for s in steps]
        rows = []
        for variant in variants:
            row = [variant]
            for s in steps:
                cell = by_key.get((variant, s))
                row.append(_fmt(cell.aggregates[metric] if cell and cell.aggregates else None))
            rows.append(row)
        blocks.append(render_table(header, rows))
    failed = [c for c in cells if c.error]
    if failed:
        blocks.append("failed cells:\n" + "\n".join(f"  {c.variant} steps={c.steps}: {c.error}" for c in failed))
    return "\n\n".join(blocks)


# --- Cross-run comparison ---

def comparison_rows(documents: Sequence[Mapping[str, Any]], labels: Sequence[str]) -> List[Dict[str, Any]]:
    """One row per report: method, dataset, query count and aggregate metrics."""
    rows = []
    for doc, label in zip(documents, labels):
        context = doc.get("context") or {}
        rows.append({
            "method": context.get("variant") or label,
            "dataset": context.get("dataset") or "-",
            "steps": context.get("steps"),
            "n_queries": doc["n_queries"],
            **{m: doc["aggregates"][m] for m in METRIC_NAMES},
        })
    return rows


def render_comparison(rows: Sequence[Mapping[str, Any]]) -> str:
    header = ["method", "dataset", "steps", "n"] + list(METRIC_NAMES)
    body = [
        [str(r["method"]), str(r["dataset"]), "-" if r["steps"] is None else str(r["steps"]), str(r["n_queries"])]
        + [_fmt(r[m]) for m in METRIC_NAMES]
        for r in rows
    ]
    return render_table(header, body)
