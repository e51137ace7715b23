"""
埋め込みプロバイダ

accuracy メトリクス用に、文書1件につきベクトル1本を返す統一インターフェースを提供する。
- BuiltinEmbedder: FNV-1a でハッシュした単語頻度ベクトル（オフライン・決定的）
- RemoteEmbedder: 外部埋め込みサービスの HTTP クライアント
  （POST {"texts": [...]} → {"vectors": [[...], ...]}、リトライ2回・指数バックオフ）
"""
import logging
import threading
from collections.abc import Sequence
from typing import Optional, Protocol

import httpx
import numpy as np
from tenacity import (
    retry,
    stop_after_attempt,
    wait_exponential,
    retry_if_exception_type,
)

from documint.exceptions import ContractViolation, EmptyText, TransportFailure
from documint.models.embedding import EmbeddingVector, ProviderConfig, ProviderKind
from documint.services.text_metrics import tokenize_words

logger = logging.getLogger(__name__)

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
FNV64_MASK = 0xFFFFFFFFFFFFFFFF

BUILTIN_PROVIDER_PREFIX = "builtin-fnv1a"


def fnv1a_64(data: bytes) -> int:
    h = FNV64_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV64_PRIME) & FNV64_MASK
    return h


def embed_builtin(text: str, dimension: int) -> EmbeddingVector:
    """
    単語頻度（TF のみ）のハッシュベクトルを作る

    単語は text_metrics と同じ規則で切り出して小文字化し、
    FNV-1a 64bit ハッシュを dimension で割った余りのバケットに +1 する。
    """
    if dimension < 8:
        raise ValueError(f"dimension must be at least 8, got {dimension}")
    if not text.strip():
        raise EmptyText("cannot embed empty text")
    values = np.zeros(dimension, dtype=float)
    for token in tokenize_words(text):
        values[fnv1a_64(token.lower().encode("utf-8")) % dimension] += 1.0
    return EmbeddingVector(
        values=tuple(values.tolist()),
        provider_id=f"{BUILTIN_PROVIDER_PREFIX}-{dimension}",
        dimension=dimension,
    )


class Embedder(Protocol):
    provider_id: str

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        ...


class BuiltinEmbedder:
    def __init__(self, dimension: int = 256):
        self.dimension = dimension
        self.provider_id = f"{BUILTIN_PROVIDER_PREFIX}-{dimension}"

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        return [embed_builtin(text, self.dimension) for text in texts]


class _RetryableError(Exception):
    """リトライ対象の失敗（通信エラー・5xx）"""

    def __init__(self, detail: str, status: Optional[int] = None):
        super().__init__(detail)
        self.detail = detail
        self.status = status


class RemoteEmbedder:
    """
    外部埋め込みサービスのクライアント

    httpx.Client はスレッドセーフなので、複数スレッドから同時にバッチを投げてよい。
    """

    def __init__(self, config: ProviderConfig, client: Optional[httpx.Client] = None):
        if config.kind != ProviderKind.REMOTE or not config.endpoint_url:
            raise ValueError("RemoteEmbedder requires a remote provider config with endpoint_url")
        self.config = config
        self.endpoint_url = config.endpoint_url
        self.provider_id = config.endpoint_url
        self.client = client or httpx.Client(timeout=config.timeout)
        self._dimension: Optional[int] = None
        self._lock = threading.Lock()

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        """
        テキストを順序どおりに埋め込む（batch_size ごとに分割して送信）

        Raises:
            TransportFailure: リトライ後も通信に失敗した場合
            ContractViolation: 返ってきたベクトル数・次元が契約と合わない場合
        """
        if not texts:
            raise ValueError("embed_remote requires a non-empty batch")
        vectors: list[EmbeddingVector] = []
        size = self.config.batch_size
        for batch_index, start in enumerate(range(0, len(texts), size)):
            batch = list(texts[start:start + size])
            vectors.extend(self._embed_batch(batch, batch_index))
        return vectors

    def _embed_batch(self, batch: list[str], batch_index: int) -> list[EmbeddingVector]:
        try:
            payload = self._post_batch(batch)
        except _RetryableError as e:
            logger.error(f"Embedding batch {batch_index} failed after retries: {e.detail}")
            raise TransportFailure(f"embedding batch {batch_index} failed: {e.detail}", e.status) from e

        raw_vectors = payload.get("vectors") if isinstance(payload, dict) else None
        if not isinstance(raw_vectors, list):
            raise ContractViolation(f"embedding batch {batch_index}: response has no 'vectors' array")
        if len(raw_vectors) != len(batch):
            raise ContractViolation(
                f"embedding batch {batch_index}: sent {len(batch)} texts but received {len(raw_vectors)} vectors"
            )

        vectors = []
        for raw in raw_vectors:
            if not isinstance(raw, list) or not raw:
                raise ContractViolation(f"embedding batch {batch_index}: vector is not a non-empty array")
            dimension = len(raw)
            self._check_dimension(dimension, batch_index)
            try:
                values = tuple(float(v) for v in raw)
            except (TypeError, ValueError):
                raise ContractViolation(f"embedding batch {batch_index}: vector holds non-numeric values") from None
            vectors.append(EmbeddingVector(values=values, provider_id=self.provider_id, dimension=dimension))
        logger.debug(f"Embedding batch {batch_index}: {len(vectors)} vectors of dimension {dimension}")
        return vectors

    def _check_dimension(self, dimension: int, batch_index: int) -> None:
        """最初に受け取った次元を記録し、以降の次元と照合する"""
        with self._lock:
            if self._dimension is None:
                self._dimension = dimension
            elif dimension != self._dimension:
                raise ContractViolation(
                    f"embedding batch {batch_index}: dimension {dimension} differs from {self._dimension}"
                )

    @retry(
        stop=stop_after_attempt(3),
        wait=wait_exponential(multiplier=0.5, min=0.5, max=4),
        retry=retry_if_exception_type(_RetryableError),
        reraise=True
    )
    def _post_batch(self, batch: list[str]) -> dict:
        try:
            response = self.client.post(self.endpoint_url, json={"texts": batch})
        except httpx.TransportError as e:
            logger.warning(f"Embedding request to {self.endpoint_url} failed: {e}")
            raise _RetryableError(f"transport error: {e}") from e

        if response.status_code >= 500:
            logger.warning(f"Embedding service returned {response.status_code}, retrying")
            raise _RetryableError("server error", response.status_code)
        if response.status_code >= 400:
            raise TransportFailure(f"embedding request rejected: {response.text[:200]}", response.status_code)
        try:
            return response.json()
        except ValueError:
            raise ContractViolation("embedding response is not valid JSON") from None

    def close(self) -> None:
        self.client.close()


def embed_remote(
    texts: Sequence[str], config: ProviderConfig, client: Optional[httpx.Client] = None
) -> list[EmbeddingVector]:
    embedder = RemoteEmbedder(config, client=client)
    try:
        return embedder.embed(texts)
    finally:
        embedder.close()


def get_embedder(config: ProviderConfig, client: Optional[httpx.Client] = None) -> Embedder:
    if config.kind == ProviderKind.REMOTE:
        logger.info(f"Using remote embedder at {config.endpoint_url}")
        return RemoteEmbedder(config, client=client)
    logger.info(f"Using builtin hash embedder (dimension={config.dimension})")
    return BuiltinEmbedder(config.dimension)
