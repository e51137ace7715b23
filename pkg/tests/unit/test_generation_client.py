"""
documint/services/generation_client.py の C0/C1 カバレッジテスト

C0: generate, collect（入力順・レイテンシ・同時実行数の上限）, aclose
C1: text の無い応答, JSON でない応答, 5xx のリトライ, リトライ上限, 4xx, max_in_flight < 1
"""
import asyncio
import json

import httpx
import pytest

from documint.exceptions import ContractViolation, TransportFailure
from documint.models.bench import FunctionTask
from documint.services.generation_client import GenerationClient

GEN_URL = "http://gen.test/v1/generate"


def make_client(transport, max_in_flight=4, model_id="model-a") -> GenerationClient:
    return GenerationClient(
        GEN_URL,
        model_id,
        max_in_flight=max_in_flight,
        client=httpx.AsyncClient(transport=transport),
    )


def make_tasks(count: int) -> list[FunctionTask]:
    return [
        FunctionTask(task_id=f"t-{i}", source=f"def f{i}():\n    return {i}", reference_docstring="Return a value.")
        for i in range(count)
    ]


# ============================================================
# generate
# ============================================================

class TestGenerate:
    async def test_returns_text(self, json_transport):
        """C0: プロンプトを送り text を返す"""
        seen = []

        def handler(request):
            seen.append(json.loads(request.content))
            return 200, {"text": '"""Adds two numbers."""'}

        client = make_client(json_transport(handler))
        assert await client.generate("prompt body") == '"""Adds two numbers."""'
        assert seen == [{"prompt": "prompt body"}]
        await client.aclose()

    async def test_missing_text(self, json_transport):
        """C1: text が無い応答は ContractViolation"""
        client = make_client(json_transport(lambda request: (200, {"output": "x"})))
        with pytest.raises(ContractViolation, match="'text'"):
            await client.generate("p")

    async def test_non_string_text(self, json_transport):
        """C1: text が文字列でなければ ContractViolation"""
        client = make_client(json_transport(lambda request: (200, {"text": 42})))
        with pytest.raises(ContractViolation):
            await client.generate("p")

    async def test_invalid_json(self, json_transport):
        """C1: JSON でない応答は ContractViolation"""
        client = make_client(json_transport(lambda request: (200, "<html>")))
        with pytest.raises(ContractViolation, match="not valid JSON"):
            await client.generate("p")

    async def test_retries_server_errors(self, json_transport, no_retry_sleep):
        """C1: 5xx は再試行し、3回目で成功"""
        calls = []

        def handler(request):
            calls.append(request)
            if len(calls) < 3:
                return 502, "bad gateway"
            return 200, {"text": "Done."}

        assert await make_client(json_transport(handler)).generate("p") == "Done."
        assert len(calls) == 3

    async def test_retry_exhaustion(self, json_transport, no_retry_sleep):
        """C1: 3回とも 5xx なら TransportFailure"""
        calls = []

        def handler(request):
            calls.append(request)
            return 503, "down"

        with pytest.raises(TransportFailure) as exc_info:
            await make_client(json_transport(handler)).generate("p")
        assert len(calls) == 3
        assert exc_info.value.status == 503

    async def test_client_error_is_not_retried(self, json_transport, no_retry_sleep):
        """C1: 4xx は即座に TransportFailure"""
        calls = []

        def handler(request):
            calls.append(request)
            return 400, "bad prompt"

        with pytest.raises(TransportFailure):
            await make_client(json_transport(handler)).generate("p")
        assert len(calls) == 1

    def test_max_in_flight_must_be_positive(self):
        """C1: max_in_flight < 1 は ValueError"""
        with pytest.raises(ValueError):
            GenerationClient(GEN_URL, "model-a", max_in_flight=0)


# ============================================================
# collect
# ============================================================

class TestCollect:
    async def test_keeps_input_order(self, json_transport):
        """C0: 応答の到着順に関係なく入力順で返す"""
        def handler(request):
            prompt = json.loads(request.content)["prompt"]
            return 200, {"text": f"Doc for {prompt}."}

        tasks = make_tasks(5)
        prompts = [t.task_id for t in tasks]
        records = await make_client(json_transport(handler), model_id="model-z").collect(tasks, prompts)
        assert [r.task_id for r in records] == prompts
        assert [r.generated_docstring for r in records] == [f"Doc for {p}." for p in prompts]
        assert all(r.model_id == "model-z" for r in records)
        assert all(r.latency is not None and r.latency >= 0 for r in records)

    async def test_respects_max_in_flight(self):
        """C0: 同時に送るリクエストは max_in_flight 件まで"""
        in_flight = 0
        peak = 0

        async def handler(request):
            nonlocal in_flight, peak
            in_flight += 1
            peak = max(peak, in_flight)
            await asyncio.sleep(0.01)
            in_flight -= 1
            return httpx.Response(200, json={"text": "Doc."})

        tasks = make_tasks(6)
        client = make_client(httpx.MockTransport(handler), max_in_flight=2)
        records = await client.collect(tasks, ["p"] * len(tasks))
        assert len(records) == 6
        assert peak == 2

    async def test_failure_propagates(self, json_transport):
        """C1: 1件でも失敗すれば例外が伝わる"""
        def handler(request):
            prompt = json.loads(request.content)["prompt"]
            if prompt == "t-1":
                return 200, {"wrong": True}
            return 200, {"text": "Doc."}

        tasks = make_tasks(3)
        with pytest.raises(ContractViolation):
            await make_client(json_transport(handler)).collect(tasks, [t.task_id for t in tasks])

    async def test_aclose(self, json_transport):
        """C0: aclose で内部クライアントを閉じる"""
        client = make_client(json_transport(lambda request: (200, {"text": "x"})))
        await client.aclose()
        assert client.client.is_closed
