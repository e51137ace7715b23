"""
テスト共通フィクスチャ
- フィクスチャファイルのパス
- 環境変数の隔離（DOCUMINT_* を消してデフォルト設定で動かす）
- httpx.MockTransport による外部エンドポイントのスタブ
"""
import json
from pathlib import Path

import httpx
import pytest

from documint.models.bench import FunctionTask
from documint.services.embedding_service import RemoteEmbedder
from documint.services.generation_client import GenerationClient

FIXTURES_DIR = Path(__file__).parent / "fixtures"


@pytest.fixture(autouse=True)
def clean_documint_env(monkeypatch):
    """開発者の環境変数がテスト結果に影響しないようにする"""
    for name in (
        "DOCUMINT_EMBED_URL",
        "DOCUMINT_GEN_URL",
        "DOCUMINT_HTTP_TIMEOUT_SECONDS",
        "DOCUMINT_EMBED_DIMENSION",
        "DOCUMINT_EMBED_BATCH_SIZE",
        "DOCUMINT_MAX_IN_FLIGHT",
        "DOCUMINT_WORKERS",
        "DOCUMINT_LOG_LEVEL",
    ):
        monkeypatch.delenv(name, raising=False)


@pytest.fixture()
def no_retry_sleep(monkeypatch):
    """tenacity のリトライ待ちをゼロにする（同期・非同期とも）"""
    async def instant(_seconds):
        return None

    monkeypatch.setattr(RemoteEmbedder._post_batch.retry, "sleep", lambda _seconds: None)
    monkeypatch.setattr(GenerationClient._post.retry, "sleep", instant)


@pytest.fixture()
def fixtures_dir() -> Path:
    return FIXTURES_DIR


@pytest.fixture()
def parser_corpus_dir() -> Path:
    return FIXTURES_DIR / "parser_corpus"


@pytest.fixture()
def mining_dir() -> Path:
    return FIXTURES_DIR / "mining"


@pytest.fixture()
def bench_dir() -> Path:
    return FIXTURES_DIR / "bench"


@pytest.fixture()
def bench_tasks(bench_dir) -> list[FunctionTask]:
    """7件のベンチマークタスク"""
    raw = json.loads((bench_dir / "functions.json").read_text(encoding="utf-8"))
    return [FunctionTask.model_validate(item) for item in raw]


@pytest.fixture()
def simple_task() -> FunctionTask:
    return FunctionTask(
        task_id="t-add",
        source="def add(a, b):\n    return a + b",
        reference_docstring="Add two numbers.",
    )


@pytest.fixture()
def json_transport():
    """handler(request) -> (status, payload) を httpx.MockTransport に変換するファクトリ"""
    return _json_transport


def _json_transport(handler) -> httpx.MockTransport:
    def respond(request: httpx.Request) -> httpx.Response:
        status, payload = handler(request)
        if isinstance(payload, (dict, list)):
            return httpx.Response(status, json=payload)
        return httpx.Response(status, text=payload or "")
    return httpx.MockTransport(respond)
