from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing import Optional
from enum import Enum


class ProviderKind(str, Enum):
    BUILTIN_HASH = "builtin_hash"
    REMOTE = "remote"


class EmbeddingVector(BaseModel):
    """文書1件分の埋め込みベクトル"""
    model_config = ConfigDict(frozen=True)

    values: tuple[float, ...]
    provider_id: str
    dimension: int = Field(gt=0)

    @model_validator(mode="after")
    def _check_dimension(self) -> "EmbeddingVector":
        if len(self.values) != self.dimension:
            raise ValueError(f"vector has {len(self.values)} values but dimension is {self.dimension}")
        return self


class ProviderConfig(BaseModel):
    """埋め込みプロバイダ設定"""
    model_config = ConfigDict(frozen=True)

    kind: ProviderKind = ProviderKind.BUILTIN_HASH
    endpoint_url: Optional[str] = None
    timeout: float = Field(default=30.0, gt=0)
    dimension: int = Field(default=256, ge=8)
    batch_size: int = Field(default=32, ge=1)

    @model_validator(mode="after")
    def _check_remote(self) -> "ProviderConfig":
        if self.kind == ProviderKind.REMOTE and not self.endpoint_url:
            raise ValueError("remote embedding provider requires endpoint_url")
        return self
