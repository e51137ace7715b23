"""
ベンチマークハーネス

関数セットの読み込み → プロンプト作成 → 生成 docstring の収集（リモート生成 or 事前生成ファイル）
→ 参照 docstring との採点 → モデルごとの集計 → base / fine-tuned の比較、までを担当する。
"""
import asyncio
import json
import logging
from collections.abc import Sequence
from pathlib import Path
from typing import Optional

from pydantic import TypeAdapter, ValidationError

from documint.exceptions import (
    DocumintError,
    EmptyText,
    MissingGeneration,
    ParseFailure,
    SchemaError,
    ScoringError,
    TaskSetMismatch,
)
from documint.models.bench import (
    ComparisonReport,
    FunctionTask,
    GenerationRecord,
    MetricDeltas,
    RunScore,
    TaskScore,
)
from documint.models.metrics import MetricVector
from documint.services import text_metrics
from documint.services.embedding_service import Embedder
from documint.services.generation_client import GenerationClient
from documint.services.prompt_loader import load_prompt
from documint.services.pysource_parser import parse_function

logger = logging.getLogger(__name__)

_TRIPLE_QUOTES = ('"""', "'''")

_scores_adapter = TypeAdapter(RunScore | list[RunScore])


def build_prompt(task: FunctionTask) -> str:
    """システムプロンプト、空行1つ、関数ソースの順に連結する"""
    system_prompt = load_prompt()
    if system_prompt is None:
        raise DocumintError("docstring system prompt template is missing")
    return f"{system_prompt}\n\n{task.source}"


def unwrap_docstring(text: str) -> str:
    """生成結果を包む三重引用符を1組だけ外し、前後の空白を除く"""
    stripped = text.strip()
    for quote in _TRIPLE_QUOTES:
        if len(stripped) >= 2 * len(quote) and stripped.startswith(quote) and stripped.endswith(quote):
            return stripped[len(quote):-len(quote)].strip()
    return stripped


def _validate_task(raw: object) -> FunctionTask:
    task_id = raw.get("task_id") if isinstance(raw, dict) else None
    try:
        task = FunctionTask.model_validate(raw)
    except ValidationError as e:
        raise SchemaError(f"invalid task: {e.errors()[0]['msg']}", task_id) from e
    if not task.reference_docstring.strip():
        raise SchemaError("reference_docstring is empty", task.task_id)
    try:
        record = parse_function(task.source, task.task_id)
    except ParseFailure as e:
        raise SchemaError(f"source is not exactly one function: {e}", task.task_id) from e
    if record.docstring is not None:
        raise SchemaError("source must be docstring-free", task.task_id)
    return task


def load_function_set(path: str | Path) -> list[FunctionTask]:
    """
    関数セット（JSON 配列）を読み込んで検証する

    Raises:
        SchemaError: 読み込み・JSON・タスク不変条件・task_id 重複のいずれかの違反
                     （最初に問題となった task_id を含む）
    """
    function_path = Path(path)
    try:
        raw = json.loads(function_path.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise SchemaError(f"cannot load function set {function_path}: {e}") from e
    if not isinstance(raw, list) or not raw:
        raise SchemaError(f"function set {function_path} must be a non-empty JSON array")

    tasks: list[FunctionTask] = []
    seen = set()
    for item in raw:
        task = _validate_task(item)
        if task.task_id in seen:
            raise SchemaError("duplicate task_id", task.task_id)
        seen.add(task.task_id)
        tasks.append(task)
    logger.info(f"Loaded {len(tasks)} tasks from {function_path}")
    return tasks


def load_pregenerated(path: str | Path) -> list[GenerationRecord]:
    """事前生成ファイル（JSON Lines: task_id, model_id, docstring）を読み込む"""
    gen_path = Path(path)
    try:
        lines = gen_path.read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError) as e:
        raise SchemaError(f"cannot load pregenerated file {gen_path}: {e}") from e

    records: list[GenerationRecord] = []
    seen = set()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
            record = GenerationRecord(
                task_id=raw["task_id"],
                model_id=raw["model_id"],
                generated_docstring=raw["docstring"],
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValidationError) as e:
            raise SchemaError(f"{gen_path}:{lineno}: invalid generation record ({e})") from e
        key = (record.task_id, record.model_id)
        if key in seen:
            raise SchemaError(f"{gen_path}:{lineno}: duplicate generation for model '{record.model_id}'", record.task_id)
        seen.add(key)
        records.append(record)
    return records


def collect_pregenerated(tasks: Sequence[FunctionTask], path: str | Path) -> list[GenerationRecord]:
    """
    事前生成ファイルからタスクごと・モデルごとの生成結果を集める

    Raises:
        MissingGeneration: いずれかのモデルであるタスクの生成が欠けている場合
    """
    by_key: dict[tuple[str, str], GenerationRecord] = {}
    model_ids: list[str] = []
    task_ids = {t.task_id for t in tasks}
    for record in load_pregenerated(path):
        if record.task_id not in task_ids:
            logger.warning(f"Ignoring generation for unknown task '{record.task_id}' ({record.model_id})")
            continue
        if record.model_id not in model_ids:
            model_ids.append(record.model_id)
        by_key[(record.task_id, record.model_id)] = record

    if not model_ids:
        raise MissingGeneration(tasks[0].task_id)
    collected: list[GenerationRecord] = []
    for model_id in model_ids:
        for task in tasks:
            record = by_key.get((task.task_id, model_id))
            if record is None:
                raise MissingGeneration(task.task_id, model_id)
            collected.append(record.model_copy(update={
                "generated_docstring": unwrap_docstring(record.generated_docstring),
            }))
    logger.info(f"Collected {len(collected)} pregenerated docstrings for {len(model_ids)} model(s)")
    return collected


async def collect_remote(tasks: Sequence[FunctionTask], client: GenerationClient) -> list[GenerationRecord]:
    prompts = [build_prompt(task) for task in tasks]
    records = await client.collect(tasks, prompts)
    logger.info(f"Collected {len(records)} generations from {client.endpoint_url} ({client.model_id})")
    return [
        r.model_copy(update={"generated_docstring": unwrap_docstring(r.generated_docstring)})
        for r in records
    ]


def collect_generations(
    tasks: Sequence[FunctionTask],
    pregenerated: Optional[str | Path] = None,
    client: Optional[GenerationClient] = None,
) -> list[GenerationRecord]:
    """事前生成ファイルかリモート生成エンドポイントのどちらか一方から生成結果を集める"""
    if (pregenerated is None) == (client is None):
        raise ValueError("exactly one of pregenerated or client must be given")
    if pregenerated is not None:
        return collect_pregenerated(tasks, pregenerated)

    async def run() -> list[GenerationRecord]:
        try:
            return await collect_remote(tasks, client)
        finally:
            await client.aclose()

    return asyncio.run(run())


def group_by_model(records: Sequence[GenerationRecord]) -> dict[str, list[GenerationRecord]]:
    grouped: dict[str, list[GenerationRecord]] = {}
    for record in records:
        grouped.setdefault(record.model_id, []).append(record)
    return grouped


def score_run(
    records: Sequence[GenerationRecord],
    tasks: Sequence[FunctionTask],
    embedder: Embedder,
) -> RunScore:
    """
    モデル1つ分の生成結果を採点する

    accuracy は生成 docstring と参照 docstring の埋め込みのコサイン類似度、
    conciseness と clarity は生成 docstring だけから計算する。結果は task_id 順に並べる。

    Raises:
        MissingGeneration: タスクに対応する生成結果が無い場合
        ScoringError: タスク単位のメトリクス計算に失敗した場合
    """
    model_ids = {r.model_id for r in records}
    if len(model_ids) != 1:
        raise ValueError(f"score_run expects records of exactly one model, got {sorted(model_ids)}")
    model_id = model_ids.pop()
    generated = {r.task_id: r.generated_docstring for r in records}

    ordered = sorted(tasks, key=lambda t: t.task_id)
    for task in ordered:
        if task.task_id not in generated:
            raise MissingGeneration(task.task_id, model_id)
        if not generated[task.task_id].strip():
            raise ScoringError(task.task_id, EmptyText("generated docstring is empty"))

    texts = [generated[t.task_id] for t in ordered] + [t.reference_docstring for t in ordered]
    vectors = embedder.embed(texts)
    generated_vectors, reference_vectors = vectors[:len(ordered)], vectors[len(ordered):]

    per_task: list[TaskScore] = []
    for task, v_g, v_e in zip(ordered, generated_vectors, reference_vectors):
        text = generated[task.task_id]
        try:
            metrics = MetricVector(
                accuracy=text_metrics.accuracy(v_g.values, v_e.values),
                conciseness=text_metrics.conciseness(text),
                clarity=text_metrics.clarity(text_metrics.text_stats(text)),
            )
        except DocumintError as e:
            raise ScoringError(task.task_id, e) from e
        per_task.append(TaskScore(
            task_id=task.task_id,
            accuracy=metrics.accuracy,
            conciseness=metrics.conciseness,
            clarity=metrics.clarity,
            bands=text_metrics.band_verdict(metrics),
        ))

    run = RunScore(
        model_id=model_id,
        per_task=per_task,
        aggregate=text_metrics.aggregate([t.metrics for t in per_task]),
    )
    logger.info(
        f"Scored {model_id}: accuracy={run.aggregate.accuracy:.3f} "
        f"conciseness={run.aggregate.conciseness:.3f} clarity={run.aggregate.clarity:.2f}"
    )
    return run


def compare_runs(base: RunScore, tuned: RunScore) -> ComparisonReport:
    """
    base と fine-tuned のスコアを比較する

    accuracy / conciseness は相対改善率（%）、clarity は差分と判定帯の移動で表す。

    Raises:
        TaskSetMismatch: 2つのランのタスク集合が異なる場合
    """
    if set(base.task_ids) != set(tuned.task_ids):
        raise TaskSetMismatch(
            f"task sets differ between '{base.model_id}' and '{tuned.model_id}'"
        )
    base_bands, tuned_bands = text_metrics.band_movement(base.aggregate, tuned.aggregate)
    deltas = MetricDeltas(
        accuracy_pct=text_metrics.relative_improvement(base.aggregate.accuracy, tuned.aggregate.accuracy),
        conciseness_pct=text_metrics.relative_improvement(base.aggregate.conciseness, tuned.aggregate.conciseness),
        clarity_diff=tuned.aggregate.clarity - base.aggregate.clarity,
        clarity_band_from=base_bands.clarity_band,
        clarity_band_to=tuned_bands.clarity_band,
        conciseness_band_from=base_bands.conciseness_band,
        conciseness_band_to=tuned_bands.conciseness_band,
    )
    return ComparisonReport(base=base, tuned=tuned, deltas=deltas)


def load_scores(path: str | Path) -> list[RunScore]:
    """スコアファイル（RunScore 1件のオブジェクト、または配列）を読み込む"""
    scores_path = Path(path)
    try:
        raw = scores_path.read_bytes()
    except OSError as e:
        raise SchemaError(f"cannot read scores file {scores_path}: {e}") from e
    try:
        loaded = _scores_adapter.validate_json(raw)
    except ValidationError as e:
        raise SchemaError(f"invalid scores file {scores_path}: {e.errors()[0]['msg']}") from e
    scores = loaded if isinstance(loaded, list) else [loaded]
    if not scores:
        raise SchemaError(f"scores file {scores_path} holds no runs")
    return scores


def scores_json(scores: Sequence[RunScore]) -> str:
    """モデルが1つならオブジェクト、複数なら配列として出力する"""
    if len(scores) == 1:
        payload = scores[0].model_dump(mode="json")
    else:
        payload = [s.model_dump(mode="json") for s in scores]
    return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"
