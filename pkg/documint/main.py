"""
documint コマンドラインのエントリポイント

サブコマンド: mine / bench / compare / report / score
設定の優先順位はフラグ > 環境変数 > デフォルト。診断はすべて標準エラーへ、データはファイルか標準出力へ出す。
終了コード: 0 正常、1 ドメインエラー、2 使い方の誤り、130 中断
"""
import argparse
import json
import logging
import signal
import sys
import warnings
from collections.abc import Sequence
from pathlib import Path
from typing import Optional

from pydantic import ValidationError

from documint import __version__
from documint.config import LOG_LEVELS, Settings, parse_log_level
from documint.exceptions import DocumintError, SchemaError, UsageError
from documint.models.bench import RunScore
from documint.models.corpus import MiningConfig, RepoThresholds
from documint.models.embedding import ProviderConfig, ProviderKind
from documint.services import bench_harness, corpus_miner, text_metrics
from documint.services.embedding_service import Embedder, RemoteEmbedder, get_embedder
from documint.services.file_io import write_text_atomic
from documint.services.generation_client import GenerationClient
from documint.services.report_renderer import ReportFormat, render_report

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

EXIT_OK = 0
EXIT_DOMAIN_ERROR = 1
EXIT_USAGE = 2
EXIT_INTERRUPTED = 130

EMBEDDER_CHOICES = {"builtin": ProviderKind.BUILTIN_HASH, "remote": ProviderKind.REMOTE}


def configure_logging(level: int) -> None:
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--log-level",
        choices=list(LOG_LEVELS),
        default=None,
        help="diagnostic verbosity (default: DOCUMINT_LOG_LEVEL or info)",
    )
    return common


def _add_embedder_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--embedder", choices=list(EMBEDDER_CHOICES), default="builtin",
                        help="embedding provider used for accuracy (default: builtin)")
    parser.add_argument("--embed-url", default=None,
                        help="remote embedding endpoint (default: DOCUMINT_EMBED_URL)")
    parser.add_argument("--dimension", type=int, default=None,
                        help="builtin embedding dimension (default: DOCUMINT_EMBED_DIMENSION)")
    parser.add_argument("--timeout", type=float, default=None,
                        help="HTTP timeout in seconds (default: DOCUMINT_HTTP_TIMEOUT_SECONDS)")


def _add_report_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--format", choices=[f.value for f in ReportFormat], default=ReportFormat.MARKDOWN.value,
                        help="report format (default: md)")
    parser.add_argument("--out", default=None, help="output file (default: standard output)")


def build_parser() -> argparse.ArgumentParser:
    defaults = RepoThresholds()
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog="documint",
        description="Mine docstring corpora from Python sources and benchmark generated docstrings.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    mine = subparsers.add_parser("mine", parents=[common], help="build an Alpaca-format corpus from a repository manifest")
    mine.add_argument("--manifest", required=True, help="JSON array of repository metadata")
    mine.add_argument("--out", required=True, help="Alpaca JSON output file (stats go to <out>.stats.json)")
    mine.add_argument("--min-stars", type=int, default=defaults.min_stars)
    mine.add_argument("--min-forks", type=int, default=defaults.min_forks)
    mine.add_argument("--min-commits", type=int, default=defaults.min_commits)
    mine.add_argument("--min-contributors", type=int, default=defaults.min_contributors)
    mine.add_argument("--include-methods", action=argparse.BooleanOptionalAction, default=True)
    mine.add_argument("--include-nested", action=argparse.BooleanOptionalAction, default=True)
    mine.add_argument("--min-chars", type=int, default=1, help="minimum docstring length in characters")
    mine.add_argument("--exclude", nargs="+", action="extend", default=[], metavar="GLOB",
                      help="glob patterns matched against paths relative to each repository root")
    mine.add_argument("--workers", type=int, default=None, help="parser threads (default: DOCUMINT_WORKERS)")

    bench = subparsers.add_parser("bench", parents=[common], help="score generated docstrings against references")
    bench.add_argument("--functions", required=True, help="JSON array of benchmark tasks")
    source = bench.add_mutually_exclusive_group()
    source.add_argument("--model-url", default=None, help="generation endpoint (default: DOCUMINT_GEN_URL)")
    source.add_argument("--pregenerated", default=None, help="JSON Lines file of pre-generated docstrings")
    bench.add_argument("--model-id", default=None, help="model name recorded for remote generations")
    bench.add_argument("--max-in-flight", type=int, default=None,
                       help="concurrent generation requests (default: DOCUMINT_MAX_IN_FLIGHT)")
    _add_embedder_options(bench)
    bench.add_argument("--out", required=True, help="scores JSON output file")

    compare = subparsers.add_parser("compare", parents=[common], help="compare a base run with a fine-tuned run")
    compare.add_argument("--base", required=True, help="scores file of the base model")
    compare.add_argument("--tuned", required=True, help="scores file of the fine-tuned model")
    _add_report_options(compare)

    report = subparsers.add_parser("report", parents=[common], help="render one or more scores files as a table")
    report.add_argument("--scores", required=True, nargs="+", help="scores files, rendered in the given order")
    _add_report_options(report)

    score = subparsers.add_parser("score", parents=[common], help="score a single docstring")
    score.add_argument("--docstring", required=True, help="docstring text file, or - for standard input")
    score.add_argument("--reference", default=None, help="reference docstring file (enables accuracy)")
    _add_embedder_options(score)

    return parser


def _positive(name: str, value: Optional[int | float]) -> None:
    if value is not None and value <= 0:
        raise UsageError(f"{name} must be positive, got {value}")


def _provider_config(args: argparse.Namespace, settings: Settings) -> ProviderConfig:
    _positive("--timeout", args.timeout)
    kind = EMBEDDER_CHOICES[args.embedder]
    try:
        return ProviderConfig(
            kind=kind,
            endpoint_url=args.embed_url or settings.DOCUMINT_EMBED_URL,
            timeout=args.timeout or settings.DOCUMINT_HTTP_TIMEOUT_SECONDS,
            dimension=args.dimension if args.dimension is not None else settings.DOCUMINT_EMBED_DIMENSION,
            batch_size=settings.DOCUMINT_EMBED_BATCH_SIZE,
        )
    except ValidationError as e:
        raise UsageError(f"invalid embedder options: {e.errors()[0]['msg']}") from e


def _close_embedder(embedder: Embedder) -> None:
    if isinstance(embedder, RemoteEmbedder):
        embedder.close()


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        write_text_atomic(out, text)


def cmd_mine(args: argparse.Namespace, settings: Settings) -> int:
    try:
        thresholds = RepoThresholds(
            min_contributors=args.min_contributors,
            min_commits=args.min_commits,
            min_stars=args.min_stars,
            min_forks=args.min_forks,
        )
        config = MiningConfig(
            include_methods=args.include_methods,
            include_nested=args.include_nested,
            min_chars=args.min_chars,
            exclude=args.exclude,
            workers=args.workers if args.workers is not None else settings.DOCUMINT_WORKERS,
        )
    except ValidationError as e:
        error = e.errors()[0]
        raise UsageError(f"invalid mining option {error['loc'][0]}: {error['msg']}") from e

    repos = corpus_miner.load_manifest(args.manifest)
    samples, stats = corpus_miner.mine_manifest(repos, thresholds, config)
    corpus_miner.export_corpus(samples, stats, args.out)
    logger.info(
        f"Mining finished: {stats.repos_accepted}/{stats.repos_seen} repositories accepted, "
        f"{stats.samples_exported} samples written to {args.out}"
    )
    return EXIT_OK


def cmd_bench(args: argparse.Namespace, settings: Settings) -> int:
    _positive("--max-in-flight", args.max_in_flight)
    model_url = args.model_url
    if args.pregenerated is None and model_url is None:
        model_url = settings.DOCUMINT_GEN_URL
        if model_url is None:
            raise UsageError("one of --model-url (or DOCUMINT_GEN_URL) or --pregenerated is required")
    if model_url is not None and not args.model_id:
        raise UsageError("--model-id is required with remote generation")
    provider = _provider_config(args, settings)

    tasks = bench_harness.load_function_set(args.functions)
    client = None
    if model_url is not None:
        client = GenerationClient(
            endpoint_url=model_url,
            model_id=args.model_id,
            timeout=provider.timeout,
            max_in_flight=args.max_in_flight or settings.DOCUMINT_MAX_IN_FLIGHT,
        )
    records = bench_harness.collect_generations(tasks, pregenerated=args.pregenerated, client=client)

    embedder = get_embedder(provider)
    try:
        scores: list[RunScore] = [
            bench_harness.score_run(model_records, tasks, embedder)
            for model_records in bench_harness.group_by_model(records).values()
        ]
    finally:
        _close_embedder(embedder)
    write_text_atomic(args.out, bench_harness.scores_json(scores))
    return EXIT_OK


def _single_run(path: str) -> RunScore:
    scores = bench_harness.load_scores(path)
    if len(scores) != 1:
        raise SchemaError(f"{path} holds {len(scores)} runs; compare needs exactly one per file")
    return scores[0]


def cmd_compare(args: argparse.Namespace, settings: Settings) -> int:
    report = bench_harness.compare_runs(_single_run(args.base), _single_run(args.tuned))
    _emit(render_report(report, args.format), args.out)
    return EXIT_OK


def cmd_report(args: argparse.Namespace, settings: Settings) -> int:
    runs: list[RunScore] = []
    for path in args.scores:
        runs.extend(bench_harness.load_scores(path))
    _emit(render_report(runs, args.format), args.out)
    return EXIT_OK


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise SchemaError(f"cannot read {path}: {e}") from e


def cmd_score(args: argparse.Namespace, settings: Settings) -> int:
    provider = _provider_config(args, settings)
    text = bench_harness.unwrap_docstring(_read_text(args.docstring))
    v_g = v_e = None
    if args.reference is not None:
        reference = _read_text(args.reference)
        embedder = get_embedder(provider)
        try:
            v_g, v_e = (v.values for v in embedder.embed([text, reference]))
        finally:
            _close_embedder(embedder)
    result = text_metrics.score_docstring(text, v_g, v_e)
    _emit(json.dumps(result.model_dump(mode="json"), indent=2) + "\n", None)
    return EXIT_OK


COMMANDS = {
    "mine": cmd_mine,
    "bench": cmd_bench,
    "compare": cmd_compare,
    "report": cmd_report,
    "score": cmd_score,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    """CLI を実行して終了コードを返す（sys.exit は呼ばない）"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # --help / --version は 0、引数エラーは 2
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    settings = Settings()
    try:
        level = parse_log_level(args.log_level) if args.log_level else settings.log_level_value
    except ValueError as e:
        print(f"documint: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    configure_logging(level)
    # 走査対象のソースに含まれる不正なエスケープなどの警告は解析結果に影響しない
    warnings.filterwarnings("ignore", category=SyntaxWarning)

    try:
        return COMMANDS[args.command](args, settings)
    except UsageError as e:
        logger.error(e.message)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except DocumintError as e:
        logger.error(f"{type(e).__name__}: {e.message}")
        return EXIT_DOMAIN_ERROR
    except KeyboardInterrupt:
        logger.warning("Interrupted; no partial output was written")
        return EXIT_INTERRUPTED
    except Exception as e:
        logger.error(f"Unexpected error: {e}", exc_info=True)
        return EXIT_DOMAIN_ERROR


def _raise_interrupt(signum, frame) -> None:
    raise KeyboardInterrupt


def main() -> None:
    signal.signal(signal.SIGTERM, _raise_interrupt)
    sys.exit(run())


if __name__ == "__main__":
    main()
