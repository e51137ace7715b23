"""
docstring 生成エンドポイントのクライアント

POST {"prompt": "..."} → {"text": "..."}。温度などのサンプリング設定はエンドポイント側の責務。
同時リクエスト数は asyncio.Semaphore で max_in_flight に制限する。
"""
import asyncio
import logging
import time
from collections.abc import Sequence
from typing import Optional

import httpx
from tenacity import (
    retry,
    stop_after_attempt,
    wait_exponential,
    retry_if_exception_type,
)

from documint.exceptions import ContractViolation, TransportFailure
from documint.models.bench import FunctionTask, GenerationRecord

logger = logging.getLogger(__name__)


class _RetryableError(Exception):
    def __init__(self, detail: str, status: Optional[int] = None):
        super().__init__(detail)
        self.detail = detail
        self.status = status


class GenerationClient:
    """リモート生成エンドポイントへの非同期クライアント"""

    def __init__(
        self,
        endpoint_url: str,
        model_id: str,
        timeout: float = 30.0,
        max_in_flight: int = 4,
        client: Optional[httpx.AsyncClient] = None,
    ):
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be at least 1")
        self.endpoint_url = endpoint_url
        self.model_id = model_id
        self.max_in_flight = max_in_flight
        self.client = client or httpx.AsyncClient(timeout=timeout)

    @retry(
        stop=stop_after_attempt(3),
        wait=wait_exponential(multiplier=0.5, min=0.5, max=4),
        retry=retry_if_exception_type(_RetryableError),
        reraise=True
    )
    async def _post(self, prompt: str) -> dict:
        try:
            response = await self.client.post(self.endpoint_url, json={"prompt": prompt})
        except httpx.TransportError as e:
            logger.warning(f"Generation request to {self.endpoint_url} failed: {e}")
            raise _RetryableError(f"transport error: {e}") from e
        if response.status_code >= 500:
            logger.warning(f"Generation endpoint returned {response.status_code}, retrying")
            raise _RetryableError("server error", response.status_code)
        if response.status_code >= 400:
            raise TransportFailure(f"generation request rejected: {response.text[:200]}", response.status_code)
        try:
            return response.json()
        except ValueError:
            raise ContractViolation("generation response is not valid JSON") from None

    async def generate(self, prompt: str) -> str:
        """
        プロンプトを送り、生成テキストを返す

        Raises:
            TransportFailure: リトライ後も通信に失敗した場合
            ContractViolation: 応答に文字列の "text" が無い場合
        """
        try:
            payload = await self._post(prompt)
        except _RetryableError as e:
            raise TransportFailure(f"generation failed: {e.detail}", e.status) from e
        text = payload.get("text") if isinstance(payload, dict) else None
        if not isinstance(text, str):
            raise ContractViolation("generation response has no 'text' string")
        return text

    async def collect(self, tasks: Sequence[FunctionTask], prompts: Sequence[str]) -> list[GenerationRecord]:
        """タスクごとに生成を行い、入力と同じ順序で GenerationRecord を返す"""
        semaphore = asyncio.Semaphore(self.max_in_flight)

        async def run_one(task: FunctionTask, prompt: str) -> GenerationRecord:
            async with semaphore:
                started = time.perf_counter()
                text = await self.generate(prompt)
                latency = time.perf_counter() - started
            logger.debug(f"Generated docstring for {task.task_id} in {latency:.2f}s")
            return GenerationRecord(
                task_id=task.task_id,
                model_id=self.model_id,
                generated_docstring=text,
                latency=latency,
            )

        return list(await asyncio.gather(*(run_one(t, p) for t, p in zip(tasks, prompts))))

    async def aclose(self) -> None:
        await self.client.aclose()
