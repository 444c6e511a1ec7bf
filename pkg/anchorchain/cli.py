"""
Command-line entry point.

    anchorchain ingest CORPUS --store DIR
    anchorchain run QA --store DIR --out RUN_DIR [--variant V] [--steps N] [--backend oracle --truth FILE]
    anchorchain eval TRACES --qa QA --store DIR [--judge exact|remote]
    anchorchain ablate QA --store DIR --out DIR --variants V [V ...] [--steps 3 5 7 10]
    anchorchain report REPORT [REPORT ...]
    anchorchain synth OUT_DIR --n 200 --seed 42

Exit codes: 0 success, 1 usage error, 2 data error, 3 backend error.
"""

import argparse
import asyncio
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from anchorchain.config import ABLATION_STEPS, API_KEY_ENV, VARIANTS, Settings, build_settings, load_settings
from anchorchain.core.backends import CompletionBackend
from anchorchain.core.factory import create_backend, create_pipeline, create_retriever
from anchorchain.core.logger import close_run_logger, setup_run_logger
from anchorchain.core.manifest import RunManifest, file_digest, new_run_id, utc_now
from anchorchain.core.runner import load_traces, run_batch
from anchorchain.core.trace import RunTrace
from anchorchain.corpus.base import CorpusStats
from anchorchain.corpus.datasets import QARecord, load_qa_set
from anchorchain.corpus.store import CorpusStore
from anchorchain.errors import AnchorChainError, BackendError, ConfigError, DataError
from anchorchain.evaluation.judge import ExactMatchJudgeBackend
from anchorchain.evaluation.metrics import MetricReport
from anchorchain.evaluation.report import (
    AblationCell,
    ablation_document,
    comparison_rows,
    evaluate,
    load_report,
    render_ablation,
    render_comparison,
    render_report,
    report_document,
    run_diagnostics,
    write_per_query,
    write_report,
)
from anchorchain.retrieval.lexical import build_lexical_index
from anchorchain.retrieval.retriever import Retriever
from anchorchain.synthetic.generator import ChainSpec, SyntheticTruth, generate

logger = logging.getLogger(__name__)

STORE_FILE = "corpus.db"
INDEX_FILE = "index.json"
TRACES_FILE = "traces.jsonl"
METRICS_FILE = "metrics.jsonl"
REPORT_FILE = "report.json"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_BACKEND = 3


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; usage errors here are exit code 1."""

    def error(self, message: str):
        raise ConfigError(message)


# --- Shared helpers ---

def _settings(args: argparse.Namespace, **overrides: Any) -> Settings:
    return load_settings(getattr(args, "config", None), overrides)


async def _open_store(store_dir: str) -> Tuple[CorpusStore, Dict[str, Any]]:
    index_path = Path(store_dir) / INDEX_FILE
    if not index_path.is_file():
        raise DataError(f"{store_dir} has no {INDEX_FILE}; run 'anchorchain ingest' first")
    info = json.loads(index_path.read_text(encoding="utf-8"))
    store = await CorpusStore.open(str(Path(store_dir) / STORE_FILE))
    return store, info


def _load_truth(settings: Settings, truth_path: Optional[str]) -> Optional[SyntheticTruth]:
    if settings.backend != "oracle":
        return None
    if not truth_path:
        raise ConfigError("--backend oracle needs --truth")
    return SyntheticTruth.load(truth_path)


def _judge_backend(kind: str, settings: Settings) -> CompletionBackend:
    if kind == "exact":
        return ExactMatchJudgeBackend()
    return create_backend(settings.model_copy(update={"backend": "remote"}))


# --- ingest ---

async def cmd_ingest(args: argparse.Namespace) -> CorpusStats:
    """Chunk and persist a corpus, build the index once and record its digest."""
    settings = _settings(args, max_chars=args.max_chars, overlap_chars=args.overlap_chars)
    store_dir = Path(args.store)
    store_dir.mkdir(parents=True, exist_ok=True)
    store = CorpusStore(str(store_dir / STORE_FILE))
    try:
        stats = await store.ingest_corpus(args.corpus, settings.chunking)
        index = build_lexical_index(store.iter_chunks())
        info = {
            "corpus_path": str(Path(args.corpus).resolve()),
            "corpus_file_digest": file_digest(args.corpus),
            "corpus_digest": store.digest(),
            "index_digest": index.digest(),
            "chunking": settings.chunking.model_dump(),
            "stats": stats.model_dump(),
        }
        (store_dir / INDEX_FILE).write_text(json.dumps(info, indent=2) + "\n", encoding="utf-8")
    finally:
        await store.close()
    print(json.dumps({**stats.model_dump(), "index_digest": info["index_digest"]}, indent=2))
    return stats


# --- run ---

async def execute_run(
    settings: Settings,
    records: Sequence[QARecord],
    store: CorpusStore,
    store_info: Dict[str, Any],
    backend: CompletionBackend,
    run_dir: str,
    dataset_path: str,
    store_dir: str,
    retriever: Optional[Retriever] = None,
    parallelism: int = 1,
    resume: bool = False,
    run_id: Optional[str] = None,
    truth_path: Optional[str] = None,
) -> Tuple[List[RunTrace], RunManifest]:
    """One batch run into ``run_dir``: traces.jsonl plus manifest.json."""
    out = Path(run_dir)
    out.mkdir(parents=True, exist_ok=True)
    trace_path = out / TRACES_FILE
    if trace_path.exists() and not resume:
        trace_path.unlink()

    run_id = run_id or new_run_id(settings.pipeline.variant)
    manifest = RunManifest(
        run_id=run_id,
        command="run",
        settings=settings.redacted(),
        dataset_path=str(Path(dataset_path).resolve()),
        dataset_digest=file_digest(dataset_path),
        store_path=str(Path(store_dir).resolve()),
        corpus_path=store_info.get("corpus_path"),
        corpus_digest=store_info["corpus_digest"],
        index_digest=store_info["index_digest"],
        truth_path=str(Path(truth_path).resolve()) if truth_path else None,
        artifacts={"traces": TRACES_FILE, "logs": "logs"},
    )
    manifest.write(run_dir)

    setup_run_logger(run_id, str(out / "logs"))
    try:
        pipeline = create_pipeline(store, settings, backend, retriever)
        traces = await run_batch(records, pipeline, parallelism, str(trace_path), run_id)
    finally:
        close_run_logger(run_id)

    manifest = manifest.model_copy(update={
        "finished_at": utc_now(),
        "n_queries": len(traces),
        "n_aborted": sum(1 for t in traces if t.stop_reason == "aborted"),
    })
    manifest.write(run_dir)
    return traces, manifest


async def cmd_run(args: argparse.Namespace) -> int:
    if args.resume and (Path(args.out) / "manifest.json").is_file():
        previous = RunManifest.load(args.out)
        settings = Settings.model_validate({**previous.settings, "api_key": os.getenv(API_KEY_ENV)})
        run_id = previous.run_id
        truth_path = args.truth or previous.truth_path
        logger.info(f"Resuming {run_id} with its recorded settings")
    else:
        settings = _settings(args, variant=args.variant, steps=args.steps, backend=args.backend)
        run_id = args.run_id
        truth_path = args.truth

    records = load_qa_set(args.dataset)
    store, info = await _open_store(args.store)
    backend = create_backend(settings, _load_truth(settings, truth_path))
    try:
        traces, manifest = await execute_run(
            settings, records, store, info, backend, args.out, args.dataset, args.store,
            parallelism=args.parallelism, resume=args.resume, run_id=run_id, truth_path=truth_path,
        )
    finally:
        await backend.close()
        await store.close()

    print(f"{manifest.run_id}: {len(traces)} traces in {Path(args.out) / TRACES_FILE} "
          f"({manifest.n_aborted} aborted)")
    return EXIT_BACKEND if manifest.n_aborted else EXIT_OK


# --- eval ---

async def execute_eval(
    traces: Dict[str, RunTrace],
    records: Sequence[QARecord],
    store: CorpusStore,
    judge_backend: CompletionBackend,
    settings: Settings,
    out_dir: str,
    context: Dict[str, Any],
) -> MetricReport:
    """Score traces and write metrics.jsonl and report.json into ``out_dir``."""
    report = await evaluate(traces, records, store, judge_backend, settings.judge_model)
    out = Path(out_dir)
    write_per_query(report, str(out / METRICS_FILE))
    ordered = [traces[r.qid] for r in records]
    write_report(report, str(out / REPORT_FILE), run_diagnostics(ordered), context)
    return report


async def cmd_eval(args: argparse.Namespace) -> MetricReport:
    settings = _settings(args)
    traces = load_traces(args.traces)
    if not traces:
        raise DataError(f"no traces in {args.traces}")
    records = load_qa_set(args.qa)
    store, _ = await _open_store(args.store)
    judge = _judge_backend(args.judge, settings)
    first = next(iter(traces.values()))
    context = {"variant": first.variant, "dataset": Path(args.qa).stem, "steps": _steps_of(args.traces)}
    out_dir = args.out or str(Path(args.traces).parent)
    try:
        report = await execute_eval(traces, records, store, judge, settings, out_dir, context)
    finally:
        await judge.close()
        await store.close()
    print(render_report(report_document(report, context=context), first.variant))
    return report


def _steps_of(trace_path: str) -> Optional[int]:
    manifest_dir = Path(trace_path).parent
    if not (manifest_dir / "manifest.json").is_file():
        return None
    pipeline = RunManifest.load(str(manifest_dir)).settings.get("pipeline", {})
    return pipeline.get("H")


# --- ablate ---

async def cmd_ablate(args: argparse.Namespace) -> List[AblationCell]:
    """Every (variant, steps) cell through the same run and eval paths as the run/eval commands."""
    base = _settings(args, backend=args.backend)
    records = load_qa_set(args.dataset)
    store, info = await _open_store(args.store)
    backend = create_backend(base, _load_truth(base, args.truth))
    judge = _judge_backend(args.judge, base)
    retriever = create_retriever(store, base)
    out = Path(args.out)
    cells: List[AblationCell] = []
    try:
        for variant in args.variants:
            for steps in args.steps:
                cell_dir = out / f"{variant}-steps{steps}"
                try:
                    settings = build_settings({"variant": variant, "steps": steps}, base)
                    traces, _ = await execute_run(
                        settings, records, store, info, backend, str(cell_dir), args.dataset, args.store,
                        retriever=retriever, parallelism=args.parallelism, truth_path=args.truth,
                    )
                    context = {"variant": variant, "dataset": Path(args.dataset).stem, "steps": steps}
                    report = await execute_eval(
                        {t.qid: t for t in traces}, records, store, judge, settings, str(cell_dir), context
                    )
                    cells.append(AblationCell(
                        variant=variant, steps=steps, aggregates=report.aggregates,
                        trace_path=str(cell_dir / TRACES_FILE), report_path=str(cell_dir / REPORT_FILE),
                    ))
                except AnchorChainError as e:
                    logger.error(f"Ablation cell {variant} steps={steps} failed: {e}")
                    cells.append(AblationCell(variant=variant, steps=steps, error=str(e)))
    finally:
        await judge.close()
        await backend.close()
        await store.close()

    table = render_ablation(cells, args.steps)
    out.mkdir(parents=True, exist_ok=True)
    (out / "ablation.json").write_text(
        json.dumps(ablation_document(cells, args.steps), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    (out / "ablation.txt").write_text(table + "\n", encoding="utf-8")
    print(table)
    return cells


# --- report ---

def cmd_report(args: argparse.Namespace) -> List[Dict[str, Any]]:
    documents = [load_report(path) for path in args.reports]
    rows = comparison_rows(documents, [Path(p).parent.name for p in args.reports])
    print(render_comparison(rows))
    if args.json:
        Path(args.json).write_text(json.dumps(rows, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    if args.detail:
        for path, doc in zip(args.reports, documents):
            print()
            print(render_report(doc, path))
    return rows


# --- synth ---

def cmd_synth(args: argparse.Namespace) -> None:
    spec = ChainSpec(
        n_queries=args.n,
        hops_per_query=args.hops,
        distractors_per_gold=args.distractors,
        near_miss_rate=args.near_miss,
        seed=args.seed,
    )
    paths = generate(spec, args.out)
    print(json.dumps(paths._asdict(), indent=2))


# --- Parser and dispatch ---

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="anchorchain", description="Two-stage multi-hop retrieval-augmented QA")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="chunk a corpus and build the index")
    p.add_argument("corpus")
    p.add_argument("--store", required=True, help="directory for the corpus store and index.json")
    p.add_argument("--config", help="KEY=VALUE run configuration file")
    p.add_argument("--max-chars", type=int)
    p.add_argument("--overlap-chars", type=int)

    p = sub.add_parser("run", help="run one variant over a QA set")
    p.add_argument("dataset")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True, help="run directory (traces.jsonl, manifest.json)")
    p.add_argument("--config")
    p.add_argument("--variant", choices=VARIANTS)
    p.add_argument("--steps", type=int, help="sets both the sub-query count and the hop budget")
    p.add_argument("--backend", choices=["remote", "oracle"])
    p.add_argument("--truth", help="synthetic truth file (oracle backend)")
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--resume", action="store_true", help="skip qids already in traces.jsonl")
    p.add_argument("--run-id")

    p = sub.add_parser("eval", help="score a trace file")
    p.add_argument("traces")
    p.add_argument("--qa", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--config")
    p.add_argument("--judge", choices=["exact", "remote"], default="exact")
    p.add_argument("--out", help="output directory (defaults to the trace file's directory)")

    p = sub.add_parser("ablate", help="variants x step counts")
    p.add_argument("dataset")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--variants", nargs="+", choices=VARIANTS, default=["par2rag"])
    p.add_argument("--steps", nargs="+", type=int, default=list(ABLATION_STEPS))
    p.add_argument("--backend", choices=["remote", "oracle"])
    p.add_argument("--truth")
    p.add_argument("--judge", choices=["exact", "remote"], default="exact")
    p.add_argument("--parallelism", type=int, default=1)

    p = sub.add_parser("report", help="compare report files")
    p.add_argument("reports", nargs="+")
    p.add_argument("--json", help="also write the comparison rows as JSON")
    p.add_argument("--detail", action="store_true", help="print per-length breakdowns")

    p = sub.add_parser("synth", help="generate a synthetic multi-hop benchmark")
    p.add_argument("out")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--hops", nargs="+", type=int, default=[2, 3, 4])
    p.add_argument("--distractors", type=int, default=5)
    p.add_argument("--near-miss", type=float, default=0.6)
    p.add_argument("--seed", type=int, default=42)
    return parser


async def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "ingest":
        await cmd_ingest(args)
    elif args.command == "run":
        return await cmd_run(args)
    elif args.command == "eval":
        await cmd_eval(args)
    elif args.command == "ablate":
        await cmd_ablate(args)
    elif args.command == "report":
        cmd_report(args)
    elif args.command == "synth":
        cmd_synth(args)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return asyncio.run(_dispatch(args))
    except ConfigError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except BackendError as e:
        print(f"backend error: {e}", file=sys.stderr)
        return EXIT_BACKEND
    except ValueError as e:
        # pydantic validation of CLI-built models (e.g. ChainSpec)
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
