"""Command line pipeline: download -> build -> analyze -> compare -> report.

Each step reads the previous step's artifacts from the output directory and
is idempotent: existing outputs are left alone (with a notice) unless --force
is given.  Provider settings resolve as flags > environment > config file;
the effective configuration is echoed into every artifact, with the API key
redacted.

Exit codes: 0 success, 1 usage error, 2 runtime error, 130 interrupted.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import signal
import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .baseline import DEFAULT_ACC_THRESHOLD, DEFAULT_ASPL_THRESHOLD, compare
from .errors import LedgerNetError, UsageError
from .formats import (
    FORMAT_JSON,
    FORMAT_PAJEK,
    export_json,
    export_pajek,
    import_graph,
    infer_format,
)
from .graph import Chain, build_graph
from .ingestion.checkpoint import Checkpoint
from .ingestion.chunks import iter_chunk_transactions, list_chunk_files
from .ingestion.download import (
    DEFAULT_CHUNK_SIZE,
    DEFAULT_SLACK,
    BlockRange,
    RetryPolicy,
    TimeInterval,
    plan_tasks,
    resolve_block_range,
    run_download,
)
from .ingestion.providers import (
    BitcoinApiProvider,
    EthereumRpcProvider,
    FixtureProvider,
    ThrottledProvider,
    TokenBucket,
)
from .metrics import analyze

ENV_ENDPOINT = "LEDGERNET_ENDPOINT"
ENV_API_KEY = "LEDGERNET_API_KEY"
ENV_RATE_LIMIT = "LEDGERNET_RATE_LIMIT"
ENV_RETRY_CAP = "LEDGERNET_RETRY_CAP"
ENV_BACKOFF_BASE = "LEDGERNET_BACKOFF_BASE"

DEFAULT_RATE_LIMIT = 10.0
DEFAULT_BACKOFF_BASE = 0.5
DEFAULT_BITCOIN_ENDPOINT = "https://blockchain.info"


@dataclass
class RunConfig:
    """Effective settings of one subcommand run, echoed into its artifacts."""

    chain: str | None = None
    fixture: str | None = None
    endpoint: str | None = None
    api_key: str | None = None
    rate_limit: float | None = None
    retry_cap: int | None = None
    backoff_base: float | None = None
    from_block: int | None = None
    to_block: int | None = None
    from_time: int | None = None
    to_time: int | None = None
    slack: int | None = None
    chunk_size: int | None = None
    worker_count: int | None = None
    output_dir: str | None = None
    graph_format: str | None = None
    seed: int | None = None
    samples: int | None = None
    acc_threshold: float | None = None
    aspl_threshold: float | None = None
    sample_sources: int | None = None

    def to_echo_dict(self) -> dict:
        doc = {}
        for key, value in asdict(self).items():
            if value is not None:
                doc[key] = "REDACTED" if key == "api_key" else value
        return doc


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="ledgernet",
        description="Download ledger transactions, build the account-interaction "
                    "graph, and test it for small-world structure.")
    parser.add_argument("--version", action="version",
                        version=f"ledgernet {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def common(p):
        p.add_argument("--output-dir", default=".", metavar="DIR",
                       help="directory for pipeline artifacts (default: .)")
        p.add_argument("--force", action="store_true",
                       help="rewrite outputs that already exist")

    p = sub.add_parser("download", help="fetch a block range into chunk files")
    p.add_argument("--chain", required=True, choices=[c.value for c in Chain])
    p.add_argument("--fixture", metavar="DIR",
                   help="read blocks from a fixture directory instead of the network")
    p.add_argument("--endpoint", metavar="URL", help="provider endpoint URL")
    p.add_argument("--api-key", metavar="KEY", help="provider API key")
    p.add_argument("--from-block", type=int, metavar="N")
    p.add_argument("--to-block", type=int, metavar="N")
    p.add_argument("--from-time", type=int, metavar="UNIX",
                   help="interval start, unix seconds (resolved to blocks)")
    p.add_argument("--to-time", type=int, metavar="UNIX")
    p.add_argument("--chunk-size", type=int, default=DEFAULT_CHUNK_SIZE, metavar="N")
    p.add_argument("--workers", type=int, default=None, metavar="N",
                   help="download workers (default: logical core count)")
    p.add_argument("--rate-limit", type=float, default=None, metavar="R",
                   help="max requests per second, 0 disables (default: 10)")
    p.add_argument("--retry-cap", type=int, default=None, metavar="N",
                   help="max attempts per request (default: retry forever)")
    p.add_argument("--backoff-base", type=float, default=None, metavar="SEC")
    p.add_argument("--slack", type=int, default=DEFAULT_SLACK, metavar="N",
                   help="blocks scanned linearly around each interval boundary")
    p.add_argument("--config", metavar="PATH", help="JSON file with provider settings")
    common(p)
    p.set_defaults(handler=cmd_download)

    p = sub.add_parser("build", help="build graph files from downloaded chunks")
    p.add_argument("--chain", choices=[c.value for c in Chain],
                   help="chain of the chunk data (default: from checkpoint)")
    p.add_argument("--chunks", metavar="DIR",
                   help="chunk directory (default: <output-dir>/chunks)")
    p.add_argument("--checkpoint", metavar="PATH",
                   help="checkpoint file (default: <output-dir>/checkpoint.json)")
    p.add_argument("--format", choices=[FORMAT_JSON, FORMAT_PAJEK, "both"],
                   default="both")
    common(p)
    p.set_defaults(handler=cmd_build)

    p = sub.add_parser("analyze", help="compute network metrics for a graph file")
    p.add_argument("--graph", required=True, metavar="PATH")
    p.add_argument("--format", choices=[FORMAT_JSON, FORMAT_PAJEK],
                   help="graph file format (default: from file suffix)")
    p.add_argument("--workers", type=int, default=None, metavar="N")
    p.add_argument("--sample-sources", type=int, default=None, metavar="K",
                   help="estimate path lengths from K BFS sources instead of all")
    p.add_argument("--seed", type=int, default=0, metavar="N",
                   help="seed for sampled path lengths")
    p.add_argument("--output", metavar="PATH",
                   help="report path (default: metrics.json beside the graph)")
    common(p)
    p.set_defaults(handler=cmd_analyze)

    p = sub.add_parser("compare",
                       help="classify a graph against a random baseline")
    p.add_argument("--graph", required=True, metavar="PATH")
    p.add_argument("--format", choices=[FORMAT_JSON, FORMAT_PAJEK])
    p.add_argument("--seed", type=int, default=0, metavar="N")
    p.add_argument("--samples", type=int, default=1, metavar="N",
                   help="baseline graphs to average (default: 1)")
    p.add_argument("--acc-threshold", type=float, default=DEFAULT_ACC_THRESHOLD)
    p.add_argument("--aspl-threshold", type=float, default=DEFAULT_ASPL_THRESHOLD)
    p.add_argument("--workers", type=int, default=None, metavar="N")
    p.add_argument("--sample-sources", type=int, default=None, metavar="K")
    p.add_argument("--output", metavar="PATH",
                   help="report path (default: comparison.json beside the graph)")
    common(p)
    p.set_defaults(handler=cmd_compare)

    p = sub.add_parser("report", help="summarize artifacts in a directory")
    p.add_argument("--dir", default=".", metavar="DIR")
    p.set_defaults(handler=cmd_report)

    return parser


def _setting(flag_value, env_name: str, file_config: dict, key: str,
             default, cast):
    """Resolve one setting: flag > environment > config file > default."""
    if flag_value is not None:
        return flag_value
    raw = os.environ.get(env_name)
    source = f"environment variable {env_name}"
    if raw is None and key in file_config and file_config[key] is not None:
        raw, source = file_config[key], f"config key {key!r}"
    if raw is None:
        return default
    try:
        return cast(raw)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad value for {source}: {raw!r}") from exc


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    return doc


def _workers(value) -> int:
    count = (os.cpu_count() or 1) if value is None else value
    if count < 1:
        raise UsageError(f"--workers must be >= 1, got {count}")
    return count


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _write_json(path, doc) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _load_graph(args):
    fmt = args.format or infer_format(args.graph)
    return import_graph(args.graph, fmt), fmt


def _skip_existing(path, force: bool) -> bool:
    if Path(path).exists() and not force:
        print(f"keeping existing {path} (use --force to rewrite)")
        return True
    return False


def cmd_download(args) -> int:
    chain = Chain(args.chain)
    file_config = _load_config_file(args.config)
    endpoint = _setting(args.endpoint, ENV_ENDPOINT, file_config,
                        "endpoint", None, str)
    api_key = _setting(args.api_key, ENV_API_KEY, file_config,
                       "api_key", None, str)
    rate_limit = _setting(args.rate_limit, ENV_RATE_LIMIT, file_config,
                          "rate_limit", DEFAULT_RATE_LIMIT, float)
    retry_cap = _setting(args.retry_cap, ENV_RETRY_CAP, file_config,
                         "retry_cap", None, int)
    backoff_base = _setting(args.backoff_base, ENV_BACKOFF_BASE, file_config,
                            "backoff_base", DEFAULT_BACKOFF_BASE, float)
    worker_count = _workers(args.workers)
    if args.chunk_size < 1:
        raise UsageError(f"--chunk-size must be >= 1, got {args.chunk_size}")

    by_block = args.from_block is not None or args.to_block is not None
    by_time = args.from_time is not None or args.to_time is not None
    if by_block == by_time:
        raise UsageError("give exactly one of --from-block/--to-block "
                         "or --from-time/--to-time")
    if by_block and (args.from_block is None or args.to_block is None):
        raise UsageError("--from-block and --to-block must be given together")
    if by_time and (args.from_time is None or args.to_time is None):
        raise UsageError("--from-time and --to-time must be given together")

    if args.fixture is not None:
        provider = FixtureProvider(args.fixture, chain)
    elif chain is Chain.ETHEREUM:
        if endpoint is None:
            raise UsageError("ethereum needs --endpoint (or LEDGERNET_ENDPOINT), "
                             "e.g. an Infura-style JSON-RPC URL")
        provider = EthereumRpcProvider(endpoint, api_key)
    else:
        provider = BitcoinApiProvider(endpoint or DEFAULT_BITCOIN_ENDPOINT)
    if rate_limit and rate_limit > 0:
        provider = ThrottledProvider(provider, TokenBucket(rate_limit))
    retry_policy = RetryPolicy(base_delay=backoff_base, max_attempts=retry_cap)

    if by_block:
        try:
            block_range = BlockRange(args.from_block, args.to_block)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    else:
        try:
            interval = TimeInterval(args.from_time, args.to_time)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        block_range = resolve_block_range(interval, provider,
                                          slack=args.slack, policy=retry_policy)
        print(f"interval [{args.from_time}, {args.to_time}] covers blocks "
              f"{block_range.first}..{block_range.last}")

    out_dir = Path(args.output_dir)
    chunk_dir = out_dir / "chunks"
    checkpoint_path = out_dir / "checkpoint.json"
    if args.force and checkpoint_path.exists():
        checkpoint_path.unlink()
        if chunk_dir.is_dir():
            for chunk in list_chunk_files(chunk_dir):
                chunk.unlink()
        print("discarded previous checkpoint and chunk files")
    if checkpoint_path.exists():
        checkpoint = Checkpoint.load(checkpoint_path)
    else:
        checkpoint = Checkpoint(chain, block_range.first, block_range.last,
                                args.chunk_size)
    tasks = plan_tasks(block_range, args.chunk_size, checkpoint, chain=chain)
    planned = len(checkpoint.planned_firsts())
    if not tasks:
        print(f"nothing to do: all {planned} chunks are already downloaded")

    config = RunConfig(
        chain=chain.value, fixture=args.fixture, endpoint=endpoint,
        api_key=api_key, rate_limit=rate_limit, retry_cap=retry_cap,
        backoff_base=backoff_base, from_block=args.from_block,
        to_block=args.to_block, from_time=args.from_time, to_time=args.to_time,
        slack=args.slack, chunk_size=args.chunk_size, worker_count=worker_count,
        output_dir=str(out_dir))

    stop_event = threading.Event()

    def on_sigint(signum, frame):
        if not stop_event.is_set():
            stop_event.set()
            print("interrupt received: finishing in-flight chunks, "
                  "checkpointing, then stopping", file=sys.stderr)

    previous_handler = signal.signal(signal.SIGINT, on_sigint)
    try:
        summary = run_download(
            tasks, provider, checkpoint, chunk_dir=chunk_dir,
            checkpoint_path=checkpoint_path, worker_count=worker_count,
            retry_policy=retry_policy, stop_event=stop_event)
    finally:
        signal.signal(signal.SIGINT, previous_handler)

    doc = {
        "tool": "ledgernet",
        "tool_version": __version__,
        "config": config.to_echo_dict(),
        "block_range": {"first": block_range.first, "last": block_range.last},
        "chunks_total": planned,
        "chunks_done": len(checkpoint.done),
        "chunks_completed_this_run": summary.chunks_completed,
        "blocks_fetched": summary.blocks_fetched,
        "transactions_written": summary.transactions_written,
        "interrupted": summary.interrupted,
    }
    _write_json(out_dir / "download_summary.json", doc)
    print(f"downloaded {summary.blocks_fetched} blocks "
          f"({summary.transactions_written} transactions) into "
          f"{summary.chunks_completed} chunks; "
          f"{len(checkpoint.done)}/{planned} chunks done")
    if summary.interrupted:
        print("download interrupted; rerun the same command to resume",
              file=sys.stderr)
        return 130
    return 0


def cmd_build(args) -> int:
    out_dir = Path(args.output_dir)
    chunk_dir = Path(args.chunks) if args.chunks else out_dir / "chunks"
    checkpoint_path = (Path(args.checkpoint) if args.checkpoint
                       else out_dir / "checkpoint.json")
    chain = Chain(args.chain) if args.chain else None
    if checkpoint_path.exists():
        checkpoint = Checkpoint.load(checkpoint_path)
        if chain is None:
            chain = checkpoint.chain
        if not checkpoint.is_complete:
            print(f"warning: download is incomplete "
                  f"({len(checkpoint.done)}/{len(checkpoint.planned_firsts())} "
                  f"chunks); building a partial graph", file=sys.stderr)
    if chain is None:
        raise UsageError(f"no checkpoint at {checkpoint_path}; give --chain")

    targets = {}
    if args.format in (FORMAT_JSON, "both"):
        targets[FORMAT_JSON] = out_dir / "graph.json"
    if args.format in (FORMAT_PAJEK, "both"):
        targets[FORMAT_PAJEK] = out_dir / "graph.pajek"
    targets = {fmt: path for fmt, path in targets.items()
               if not _skip_existing(path, args.force)}
    if not targets:
        return 0

    graph = build_graph(iter_chunk_transactions(chunk_dir, chain), chain)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(export_json if fmt == FORMAT_JSON else export_pajek, path)
            for fmt, path in sorted(targets.items())]
    if len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=len(jobs)) as pool:
            list(pool.map(lambda job: job[0](graph, job[1]), jobs))
    else:
        jobs[0][0](graph, jobs[0][1])
    written = ", ".join(str(path) for _, path in jobs)
    print(f"built {chain.value} graph: {graph.node_count} nodes, "
          f"{graph.edge_count} edges -> {written}")
    return 0


def cmd_analyze(args) -> int:
    output = (Path(args.output) if args.output
              else Path(args.graph).parent / "metrics.json")
    if _skip_existing(output, args.force):
        return 0
    worker_count = _workers(args.workers)
    graph, fmt = _load_graph(args)
    report = analyze(graph, worker_count,
                     sample_sources=args.sample_sources, seed=args.seed)
    config = RunConfig(worker_count=worker_count, graph_format=fmt,
                       seed=args.seed, sample_sources=args.sample_sources)
    doc = {
        "tool": "ledgernet",
        "tool_version": __version__,
        "generated_at": _now(),
        "graph_file": str(args.graph),
        "graph_sha256": _sha256(args.graph),
        "config": config.to_echo_dict(),
    }
    doc.update(report.to_json_dict())
    _write_json(output, doc)
    acc = "undefined" if report.graph_acc is None else f"{report.graph_acc:.6g}"
    aspl_text = ("undefined" if report.main_component_aspl is None
                 else f"{report.main_component_aspl:.6g}")
    print(f"analyzed {args.graph}: {report.node_count} nodes, "
          f"{report.edge_count} edges, {report.components.count} components, "
          f"ACC {acc}, main-component ASPL {aspl_text} -> {output}")
    return 0


def cmd_compare(args) -> int:
    output = (Path(args.output) if args.output
              else Path(args.graph).parent / "comparison.json")
    if _skip_existing(output, args.force):
        return 0
    worker_count = _workers(args.workers)
    if args.samples < 1:
        raise UsageError(f"--samples must be >= 1, got {args.samples}")
    graph, fmt = _load_graph(args)
    comparison = compare(graph, seed=args.seed, samples=args.samples,
                         worker_count=worker_count,
                         acc_threshold=args.acc_threshold,
                         aspl_threshold=args.aspl_threshold,
                         sample_sources=args.sample_sources)
    config = RunConfig(worker_count=worker_count, graph_format=fmt,
                       seed=args.seed, samples=args.samples,
                       acc_threshold=args.acc_threshold,
                       aspl_threshold=args.aspl_threshold,
                       sample_sources=args.sample_sources)
    doc = {
        "tool": "ledgernet",
        "tool_version": __version__,
        "generated_at": _now(),
        "graph_file": str(args.graph),
        "graph_sha256": _sha256(args.graph),
        "config": config.to_echo_dict(),
    }
    doc.update(comparison.to_json_dict())
    _write_json(output, doc)
    verdict = comparison.verdict
    answer = "IS" if verdict.is_small_world else "is NOT"
    print(f"{args.graph} {answer} small-world: "
          f"ACC ratio {verdict.acc_ratio:.4g} "
          f"(threshold >= {verdict.acc_threshold:g}), "
          f"ASPL ratio {verdict.aspl_ratio:.4g} "
          f"(threshold <= {verdict.aspl_threshold:g}) -> {output}")
    return 0


def cmd_report(args) -> int:
    root = Path(args.dir)
    found = False

    checkpoint_path = root / "checkpoint.json"
    if checkpoint_path.exists():
        found = True
        checkpoint = Checkpoint.load(checkpoint_path)
        planned = len(checkpoint.planned_firsts())
        state = "complete" if checkpoint.is_complete else "partial"
        print(f"download: {checkpoint.chain.value} blocks "
              f"{checkpoint.first}..{checkpoint.last}, "
              f"{len(checkpoint.done)}/{planned} chunks ({state})")

    for name in ("graph.json", "graph.pajek"):
        path = root / name
        if path.exists():
            found = True
            print(f"graph: {path} ({path.stat().st_size} bytes)")

    metrics_path = root / "metrics.json"
    if metrics_path.exists():
        found = True
        with open(metrics_path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        print(f"metrics: {doc.get('node_count')} nodes, "
              f"{doc.get('edge_count')} edges, "
              f"{doc.get('components', {}).get('count')} components, "
              f"ACC {doc.get('graph_acc')}, "
              f"main-component ASPL {doc.get('main_component_aspl')}")

    comparison_path = root / "comparison.json"
    if comparison_path.exists():
        found = True
        with open(comparison_path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        verdict = doc.get("verdict", {})
        answer = "small-world" if verdict.get("is_small_world") else "not small-world"
        print(f"comparison: {answer} "
              f"(ACC ratio {verdict.get('acc_ratio')}, "
              f"ASPL ratio {verdict.get('aspl_ratio')})")

    if not found:
        print(f"no pipeline artifacts found in {root}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "command", None) is None:
            parser.print_usage(sys.stderr)
            return 1
        return args.handler(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return 130
    except (LedgerNetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else 0


if __name__ == "__main__":
    sys.exit(main())
