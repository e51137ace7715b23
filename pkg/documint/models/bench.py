from pydantic import BaseModel, ConfigDict, Field, model_validator
from decimal import Decimal
from typing import Optional
from enum import Enum
import math
import statistics

from documint.models.metrics import BandVerdict, ClarityBand, ConcisenessBand, MetricVector


class OriginTag(str, Enum):
    """ベンチマーク関数の出典"""
    MBPP = "mbpp"
    HUMANEVAL = "humaneval"
    APPS = "apps"
    CUSTOM = "custom"


class FunctionTask(BaseModel):
    """ベンチマーク対象の関数（docstring なし）と参照 docstring"""
    model_config = ConfigDict(frozen=True)

    task_id: str = Field(min_length=1)
    source: str
    reference_docstring: str
    origin_tag: OriginTag = OriginTag.CUSTOM


class GenerationRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    task_id: str
    model_id: str
    generated_docstring: str
    latency: Optional[float] = None  # 秒


class TaskScore(BaseModel):
    """タスク1件のスコア（スコアファイルではメトリクスを平坦に並べる）"""
    model_config = ConfigDict(frozen=True)

    task_id: str
    accuracy: float = Field(ge=-1.0, le=1.0)
    conciseness: float = Field(ge=0.0, le=1.0)
    clarity: float
    bands: BandVerdict

    @property
    def metrics(self) -> MetricVector:
        return MetricVector(accuracy=self.accuracy, conciseness=self.conciseness, clarity=self.clarity)


class RunScore(BaseModel):
    """モデル1つ分のスコア。per_task が空のものは集計値のみ（公開表の値など）"""
    model_config = ConfigDict(frozen=True)

    model_id: str
    per_task: list[TaskScore] = []
    aggregate: MetricVector

    @model_validator(mode="after")
    def _check_aggregate(self) -> "RunScore":
        if not self.per_task:
            return self
        for field in ("accuracy", "conciseness", "clarity"):
            mean = statistics.fmean(getattr(t, field) for t in self.per_task)
            if not math.isclose(mean, getattr(self.aggregate, field), rel_tol=1e-9, abs_tol=1e-9):
                raise ValueError(f"aggregate {field} does not equal the per-task mean")
        return self

    @property
    def task_ids(self) -> list[str]:
        return [t.task_id for t in self.per_task]


class MetricDeltas(BaseModel):
    """base→tuned の改善量（accuracy/conciseness は相対%、clarity は差分と帯の移動）"""
    model_config = ConfigDict(frozen=True)

    accuracy_pct: Decimal
    conciseness_pct: Decimal
    clarity_diff: float
    clarity_band_from: ClarityBand
    clarity_band_to: ClarityBand
    conciseness_band_from: ConcisenessBand
    conciseness_band_to: ConcisenessBand


class ComparisonReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    base: RunScore
    tuned: RunScore
    deltas: MetricDeltas
