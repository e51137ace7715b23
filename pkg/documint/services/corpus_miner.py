"""
コーパスマイナー

リポジトリを閾値でふるい分け、採用したソースツリーから関数と docstring の組を抽出して
重複を除き、Alpaca 形式（instruction / response）の学習データとして書き出す。
instruction は docstring を取り除いた関数ソース、response は docstring 本文。
"""
import hashlib
import json
import logging
import os
import re
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from fnmatch import fnmatchcase
from pathlib import Path
from typing import Optional

from pydantic import TypeAdapter, ValidationError

from documint.exceptions import ExportError, MiningError, ParseFailure, SchemaError, WalkError
from documint.models.corpus import (
    CorpusSample,
    FilterDecision,
    MiningConfig,
    MiningStats,
    RejectReason,
    RepoMeta,
    RepoThresholds,
    SampleOrigin,
)
from documint.models.source import FunctionRecord
from documint.services.file_io import write_atomic, write_text_atomic
from documint.services.pysource_parser import parse_function, scan_module, strip_docstring

logger = logging.getLogger(__name__)

_BLANK_RUN_RE = re.compile(r"[ \t]+")

_manifest_adapter = TypeAdapter(list[RepoMeta])


def filter_repo(meta: RepoMeta, thresholds: RepoThresholds = RepoThresholds()) -> FilterDecision:
    """4つの閾値をすべて「より大きい」で満たすリポジトリだけを採用する"""
    checks = (
        (RejectReason.CONTRIBUTORS, meta.contributors, thresholds.min_contributors),
        (RejectReason.COMMITS, meta.commits, thresholds.min_commits),
        (RejectReason.STARS, meta.stars, thresholds.min_stars),
        (RejectReason.FORKS, meta.forks, thresholds.min_forks),
    )
    for reason, value, minimum in checks:
        if not value > minimum:
            return FilterDecision(accepted=False, reason=reason)
    return FilterDecision(accepted=True)


def normalize_for_hash(text: str) -> str:
    """空白・タブの連続を1つにまとめ、行末の空白を除く"""
    lines = [_BLANK_RUN_RE.sub(" ", line).rstrip() for line in text.splitlines()]
    return "\n".join(lines).rstrip()


def content_hash(instruction: str, response: str) -> str:
    payload = normalize_for_hash(instruction) + "\x00" + normalize_for_hash(response)
    return hashlib.blake2b(payload.encode("utf-8"), digest_size=8).hexdigest()


def make_sample(record: FunctionRecord, repo_id: str, file_path: str) -> CorpusSample:
    instruction = strip_docstring(record)
    response = record.docstring.content if record.docstring else ""
    return CorpusSample(
        instruction=instruction,
        response=response,
        origin=SampleOrigin(repo_id=repo_id, file_path=file_path, qualified_name=record.qualified_name),
        content_hash=content_hash(instruction, response),
    )


def dedup_samples(samples: Sequence[CorpusSample]) -> tuple[list[CorpusSample], int]:
    """content_hash が同じサンプルを除く（最初の出現を残し、順序は保つ）"""
    seen = set()
    unique: list[CorpusSample] = []
    for sample in samples:
        if sample.content_hash in seen:
            logger.debug(
                f"Duplicate sample dropped: {sample.origin.file_path}::{sample.origin.qualified_name}"
            )
            continue
        seen.add(sample.content_hash)
        unique.append(sample)
    return unique, len(samples) - len(unique)


def _is_excluded(relative: str, patterns: Sequence[str]) -> bool:
    return any(fnmatchcase(relative, p) or fnmatchcase("/" + relative, p) for p in patterns)


def discover_files(
    root: Path,
    exclude: Sequence[str] = (),
    unreadable: Optional[list[str]] = None,
) -> list[str]:
    """
    拡張子 .py（大文字小文字を区別しない）のファイルを相対 POSIX パスの辞書順で返す

    読めないサブディレクトリは警告を出して飛ばし、unreadable に相対パスを追加する。

    Raises:
        OSError: ルート自体が読めない場合
    """
    found: list[str] = []

    def on_walk_error(error: OSError) -> None:
        if error.filename is None or Path(error.filename) == root:
            raise error
        relative = Path(error.filename).relative_to(root).as_posix()
        logger.warning(f"Cannot read directory {relative}: {error.strerror or error}")
        if unreadable is not None:
            unreadable.append(relative)

    for dirpath, dirnames, filenames in os.walk(root, onerror=on_walk_error):
        dirnames.sort()
        for filename in sorted(filenames):
            if not filename.lower().endswith(".py"):
                continue
            full = Path(dirpath) / filename
            if not full.is_file():
                continue
            relative = full.relative_to(root).as_posix()
            if _is_excluded(relative, exclude):
                logger.debug(f"Excluded by pattern: {relative}")
                continue
            found.append(relative)
    return sorted(found)


def _scan_file(root: Path, relative: str) -> Optional[list[FunctionRecord]]:
    try:
        data = (root / relative).read_bytes()
    except OSError as e:
        logger.warning(f"Cannot read {relative}: {e}")
        return None
    try:
        return scan_module(data, relative)
    except ParseFailure as e:
        logger.warning(f"Parse failure in {relative}: {e}")
        return None


def _is_filtered(record: FunctionRecord, config: MiningConfig) -> bool:
    if record.is_method and not config.include_methods:
        return True
    if record.is_nested and not config.include_nested:
        return True
    return len(record.docstring.content.strip()) < config.min_chars


def _reparses_docstring_free(instruction: str, file_path: str) -> bool:
    try:
        return parse_function(instruction, file_path).docstring is None
    except ParseFailure:
        return False


def mine_tree(
    root_path: str | Path,
    config: MiningConfig = MiningConfig(),
    repo_id: str = "",
) -> tuple[list[CorpusSample], MiningStats]:
    """
    ソースツリーを走査して学習サンプルを抽出する

    ファイルの解析はスレッドプールで並列に行うが、結果はパスの辞書順で統合するため
    スレッド数によって出力が変わることはない。

    Raises:
        WalkError: ルートがディレクトリとして読めない場合
    """
    root = Path(root_path)
    if not root.is_dir():
        raise WalkError(f"cannot walk {root}: not a readable directory")
    unreadable: list[str] = []
    try:
        paths = discover_files(root, config.exclude, unreadable)
    except OSError as e:
        raise WalkError(f"cannot walk {root}: {e}") from e

    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        results = list(pool.map(lambda relative: _scan_file(root, relative), paths))

    files_parsed = parse_failures = functions_seen = with_docstring = filtered = 0
    samples: list[CorpusSample] = []
    for relative, records in zip(paths, results):
        if records is None:
            parse_failures += 1
            continue
        files_parsed += 1
        functions_seen += len(records)
        for record in records:
            if record.docstring is None:
                continue
            with_docstring += 1
            if _is_filtered(record, config):
                filtered += 1
                continue
            sample = make_sample(record, repo_id, relative)
            if not _reparses_docstring_free(sample.instruction, relative):
                logger.warning(f"Stripped source of {relative}::{record.qualified_name} does not re-parse; skipped")
                filtered += 1
                continue
            samples.append(sample)

    unique, removed = dedup_samples(samples)
    stats = MiningStats(
        files_seen=len(paths),
        unreadable_dirs=len(unreadable),
        files_parsed=files_parsed,
        parse_failures=parse_failures,
        functions_seen=functions_seen,
        functions_with_docstring=with_docstring,
        functions_filtered=filtered,
        duplicates_removed=removed,
        samples_exported=len(unique),
    )
    stats.check_invariants()
    logger.info(
        f"Mined {root}: {stats.files_parsed}/{stats.files_seen} files parsed, "
        f"{stats.samples_exported} samples ({stats.duplicates_removed} duplicates removed)"
    )
    return unique, stats


def load_manifest(path: str | Path) -> list[RepoMeta]:
    """
    リポジトリマニフェスト（JSON 配列）を読み込む

    root_path が相対パスの場合はマニフェストのあるディレクトリを基準に解決する。
    """
    manifest_path = Path(path)
    try:
        raw = manifest_path.read_bytes()
    except OSError as e:
        raise SchemaError(f"cannot read manifest {manifest_path}: {e}") from e
    try:
        repos = _manifest_adapter.validate_json(raw)
    except ValidationError as e:
        raise SchemaError(f"invalid manifest {manifest_path}: {e.errors()[0]['msg']}") from e

    resolved = []
    for repo in repos:
        root = Path(repo.root_path)
        if not root.is_absolute():
            root = manifest_path.parent / root
        resolved.append(repo.model_copy(update={"root_path": str(root)}))
    return resolved


def mine_manifest(
    repos: Sequence[RepoMeta],
    thresholds: RepoThresholds = RepoThresholds(),
    config: MiningConfig = MiningConfig(),
) -> tuple[list[CorpusSample], MiningStats]:
    """採用されたリポジトリをマニフェスト順にマイニングし、リポジトリ間でも重複を除く"""
    samples: list[CorpusSample] = []
    stats = MiningStats(repos_seen=len(repos))
    for repo in repos:
        decision = filter_repo(repo, thresholds)
        if not decision.accepted:
            logger.warning(f"Repository {repo.repo_id} rejected: {decision.reason.value} below threshold")
            continue
        repo_samples, repo_stats = mine_tree(repo.root_path, config, repo_id=repo.repo_id)
        samples.extend(repo_samples)
        stats = stats.merge(repo_stats.model_copy(update={"repos_accepted": 1}))

    unique, removed = dedup_samples(samples)
    stats = stats.model_copy(update={
        "duplicates_removed": stats.duplicates_removed + removed,
        "samples_exported": len(unique),
    })
    stats.check_invariants()
    if stats.files_seen > 0 and stats.files_parsed == 0:
        raise MiningError(f"all {stats.files_seen} source files failed to parse")
    return unique, stats


def alpaca_json(samples: Sequence[CorpusSample]) -> str:
    records = [{"instruction": s.instruction, "response": s.response} for s in samples]
    return json.dumps(records, ensure_ascii=False, separators=(",", ":"))


def export_alpaca(samples: Sequence[CorpusSample], out_path: str | Path) -> int:
    """
    Alpaca 形式の JSON 配列を書き出す（キーは instruction / response のみ、コンパクト形式）

    Returns:
        書き込んだバイト数

    Raises:
        ExportError: 書き込みに失敗した場合
    """
    return write_atomic(out_path, alpaca_json(samples).encode("utf-8"))


def stats_path_for(out_path: str | Path) -> Path:
    out = Path(out_path)
    return out.with_name(out.name + ".stats.json")


def stats_json(stats: MiningStats) -> str:
    return json.dumps(stats.model_dump(), indent=2) + "\n"


def export_stats(stats: MiningStats, out_path: str | Path) -> int:
    return write_text_atomic(stats_path_for(out_path), stats_json(stats))


def export_corpus(samples: Sequence[CorpusSample], stats: MiningStats, out_path: str | Path) -> None:
    """
    コーパスと stats サイドカーを書き出す

    サイドカーを先に書き、コーパスの書き込みに失敗したらサイドカーを消す。
    どちらかが失敗した場合、<out> は作られない。

    Raises:
        ExportError: いずれかの書き込みに失敗した場合
    """
    corpus = alpaca_json(samples).encode("utf-8")
    sidecar = stats_path_for(out_path)
    write_text_atomic(sidecar, stats_json(stats))
    try:
        write_atomic(out_path, corpus)
    except ExportError:
        sidecar.unlink(missing_ok=True)
        raise
