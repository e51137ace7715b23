from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing import Optional
from enum import Enum


class ConcisenessBand(str, Enum):
    """圧縮率の判定帯（理想は 0.5〜0.6）"""
    TOO_TERSE = "too_terse"
    IDEAL = "ideal"
    VERBOSE = "verbose"


class ClarityBand(str, Enum):
    """Flesch 可読性スコアの判定帯（理想は 50〜70）"""
    TOO_SIMPLE = "too_simple"
    IDEAL = "ideal"
    TOO_COMPLEX = "too_complex"


class TextStats(BaseModel):
    """単語数 w・文数 l・音節数 s"""
    model_config = ConfigDict(frozen=True)

    words: int = Field(ge=1)
    sentences: int = Field(ge=1)
    syllables: int = Field(ge=1)

    @model_validator(mode="after")
    def _check_syllables(self) -> "TextStats":
        if self.syllables < self.words:
            raise ValueError("every word has at least one syllable (syllables >= words)")
        return self


class MetricVector(BaseModel):
    """生成 docstring 1件の (accuracy, conciseness, clarity)"""
    model_config = ConfigDict(frozen=True)

    accuracy: float = Field(ge=-1.0, le=1.0)
    conciseness: float = Field(ge=0.0, le=1.0)
    clarity: float


class BandVerdict(BaseModel):
    model_config = ConfigDict(frozen=True)

    conciseness_band: ConcisenessBand
    clarity_band: ClarityBand


class DocstringScore(BaseModel):
    """score サブコマンドの出力（参照が無い場合 accuracy は None）"""
    model_config = ConfigDict(frozen=True)

    accuracy: Optional[float] = None
    conciseness: float
    clarity: float
    stats: TextStats
    bands: BandVerdict
