from documint.models.source import SourceSpan, Param, DocstringBlock, FunctionRecord, QuoteStyle
from documint.models.metrics import (
    TextStats,
    MetricVector,
    BandVerdict,
    ConcisenessBand,
    ClarityBand,
    DocstringScore,
)
from documint.models.embedding import EmbeddingVector, ProviderConfig, ProviderKind
from documint.models.corpus import (
    RepoMeta,
    RepoThresholds,
    RejectReason,
    FilterDecision,
    MiningConfig,
    SampleOrigin,
    CorpusSample,
    MiningStats,
)
from documint.models.bench import (
    OriginTag,
    FunctionTask,
    GenerationRecord,
    TaskScore,
    RunScore,
    MetricDeltas,
    ComparisonReport,
)

__all__ = [
    "SourceSpan",
    "Param",
    "DocstringBlock",
    "FunctionRecord",
    "QuoteStyle",
    "TextStats",
    "MetricVector",
    "BandVerdict",
    "ConcisenessBand",
    "ClarityBand",
    "DocstringScore",
    "EmbeddingVector",
    "ProviderConfig",
    "ProviderKind",
    "RepoMeta",
    "RepoThresholds",
    "RejectReason",
    "FilterDecision",
    "MiningConfig",
    "SampleOrigin",
    "CorpusSample",
    "MiningStats",
    "OriginTag",
    "FunctionTask",
    "GenerationRecord",
    "TaskScore",
    "RunScore",
    "MetricDeltas",
    "ComparisonReport",
]
