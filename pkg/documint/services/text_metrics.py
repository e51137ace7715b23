"""
docstring 品質メトリクス

- accuracy: 生成 docstring と参照 docstring の埋め込みのコサイン類似度
- conciseness: 生 DEFLATE（レベル6、ヘッダなし）による圧縮率 Text_C / Text_O
- clarity: Flesch の可読性スコア 206.835 − 1.015·(w/l) − 84.6·(s/w)

判定帯・集計（算術平均）・改善率（小数第1位で切り捨て）もここで扱う。
"""
import logging
import re
import statistics
import zlib
from collections.abc import Sequence
from decimal import Decimal, ROUND_DOWN
from typing import Optional

import numpy as np

from documint.exceptions import DimensionMismatch, EmptyRun, EmptyText, NonPositiveBase, ZeroVector
from documint.models.metrics import (
    BandVerdict,
    ClarityBand,
    ConcisenessBand,
    DocstringScore,
    MetricVector,
    TextStats,
)

logger = logging.getLogger(__name__)

# Flesch の定数
FLESCH_BASE = 206.835
FLESCH_SENTENCE_WEIGHT = 1.015
FLESCH_SYLLABLE_WEIGHT = 84.6

# 理想帯（両端を含む）
CONCISENESS_IDEAL = (0.5, 0.6)
CLARITY_IDEAL = (50.0, 70.0)

DEFLATE_LEVEL = 6

WORD_RE = re.compile(r"[^\W_]+")  # 英数字の最長連続（_ は区切り）
SENTENCE_SPLIT_RE = re.compile(r"[.!?\n]")
VOWEL_GROUP_RE = re.compile(r"[aeiouy]+")
VOWELS = set("aeiouy")


def tokenize_words(text: str) -> list[str]:
    return WORD_RE.findall(text)


def count_syllables(word: str) -> int:
    """母音グループ数から語末の黙字 e を引く（子音 + le で終わる語は除く）。最低1"""
    lowered = word.lower()
    count = len(VOWEL_GROUP_RE.findall(lowered))
    if lowered.endswith("e"):
        consonant_le = (
            lowered.endswith("le")
            and len(lowered) >= 3
            and lowered[-3].isalpha()
            and lowered[-3] not in VOWELS
        )
        if not consonant_le:
            count -= 1
    return max(count, 1)


def count_sentences(text: str) -> int:
    segments = SENTENCE_SPLIT_RE.split(text)
    return max(sum(1 for segment in segments if WORD_RE.search(segment)), 1)


def text_stats(text: str) -> TextStats:
    """
    単語数・文数・音節数を数える

    Raises:
        EmptyText: 空白のみ、または単語を1つも含まない場合
    """
    if not text.strip():
        raise EmptyText("text is empty or whitespace only")
    words = tokenize_words(text)
    if not words:
        raise EmptyText("text contains no words")
    return TextStats(
        words=len(words),
        sentences=count_sentences(text),
        syllables=sum(count_syllables(word) for word in words),
    )


def clarity(stats: TextStats) -> float:
    # 負の値もそのまま返す（クランプしない）
    return (
        FLESCH_BASE
        - FLESCH_SENTENCE_WEIGHT * (stats.words / stats.sentences)
        - FLESCH_SYLLABLE_WEIGHT * (stats.syllables / stats.words)
    )


def deflate_size(data: bytes) -> int:
    """zlib コンテナのヘッダ/トレーラを含まない生 DEFLATE ストリームのバイト数"""
    compressor = zlib.compressobj(DEFLATE_LEVEL, zlib.DEFLATED, -15)
    return len(compressor.compress(data) + compressor.flush())


def conciseness(text: str) -> float:
    """圧縮率 Text_C / Text_O を [0, 1] にクランプして返す"""
    if not text.strip():
        raise EmptyText("text is empty or whitespace only")
    original = text.encode("utf-8")
    ratio = deflate_size(original) / len(original)
    return min(max(ratio, 0.0), 1.0)


def accuracy(v_g: Sequence[float], v_e: Sequence[float]) -> float:
    """
    2つの埋め込みのコサイン類似度

    Raises:
        DimensionMismatch: 次元が異なる場合
        ZeroVector: どちらかがゼロベクトルの場合（埋め込み器の故障とみなす）
    """
    a = np.asarray(v_g, dtype=float)
    b = np.asarray(v_e, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"embedding dimensions differ: {a.shape} vs {b.shape}")
    norm_a = np.linalg.norm(a)
    norm_b = np.linalg.norm(b)
    if norm_a == 0 or norm_b == 0:
        raise ZeroVector("cannot compute cosine similarity of a zero vector")
    cosine = float(np.dot(a, b) / (norm_a * norm_b))
    return min(max(cosine, -1.0), 1.0)


def band_verdict(m: MetricVector) -> BandVerdict:
    low, high = CONCISENESS_IDEAL
    if m.conciseness < low:
        conciseness_band = ConcisenessBand.TOO_TERSE
    elif m.conciseness > high:
        conciseness_band = ConcisenessBand.VERBOSE
    else:
        conciseness_band = ConcisenessBand.IDEAL

    low, high = CLARITY_IDEAL
    if m.clarity < low:
        clarity_band = ClarityBand.TOO_COMPLEX
    elif m.clarity > high:
        clarity_band = ClarityBand.TOO_SIMPLE
    else:
        clarity_band = ClarityBand.IDEAL

    return BandVerdict(conciseness_band=conciseness_band, clarity_band=clarity_band)


def relative_improvement(base: float, tuned: float) -> Decimal:
    """
    base から tuned への相対改善率（%）

    100·(tuned − base)/base を小数第1位で 0 方向に切り捨てる。
    浮動小数の誤差を避けるため、最短表現の10進数で計算する。
    """
    base_dec = Decimal(repr(float(base)))
    tuned_dec = Decimal(repr(float(tuned)))
    if base_dec <= 0:
        raise NonPositiveBase(f"base value must be positive, got {base}")
    percent = Decimal(100) * (tuned_dec - base_dec) / base_dec
    result = percent.quantize(Decimal("0.1"), rounding=ROUND_DOWN)
    return result if result != 0 else Decimal("0.0")


def aggregate(vectors: Sequence[MetricVector]) -> MetricVector:
    if not vectors:
        raise EmptyRun("cannot aggregate an empty run")
    return MetricVector(
        accuracy=statistics.fmean(v.accuracy for v in vectors),
        conciseness=statistics.fmean(v.conciseness for v in vectors),
        clarity=statistics.fmean(v.clarity for v in vectors),
    )


def score_docstring(
    text: str,
    v_g: Optional[Sequence[float]] = None,
    v_e: Optional[Sequence[float]] = None,
) -> DocstringScore:
    """docstring 1件を採点する（埋め込みが両方揃っている場合のみ accuracy を計算）"""
    stats = text_stats(text)
    concise = conciseness(text)
    clear = clarity(stats)
    acc = accuracy(v_g, v_e) if v_g is not None and v_e is not None else None
    bands = band_verdict(MetricVector(accuracy=acc or 0.0, conciseness=concise, clarity=clear))
    return DocstringScore(accuracy=acc, conciseness=concise, clarity=clear, stats=stats, bands=bands)


def band_movement(base: MetricVector, tuned: MetricVector) -> tuple[BandVerdict, BandVerdict]:
    """base と tuned それぞれの判定帯（レポートの「from -> to」表示用）"""
    return band_verdict(base), band_verdict(tuned)
