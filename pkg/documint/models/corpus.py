from pydantic import BaseModel, ConfigDict, Field
from typing import Optional
from enum import Enum


class RepoMeta(BaseModel):
    """リポジトリのメタデータ（マニフェスト1行分）"""
    model_config = ConfigDict(frozen=True)

    repo_id: str
    contributors: int = Field(ge=0)
    commits: int = Field(ge=0)
    stars: int = Field(ge=0)
    forks: int = Field(ge=0)
    root_path: str


class RepoThresholds(BaseModel):
    """リポジトリ採用の閾値（いずれも「より大きい」で判定）"""
    model_config = ConfigDict(frozen=True)

    min_contributors: int = Field(default=50, ge=0)
    min_commits: int = Field(default=5000, ge=0)
    min_stars: int = Field(default=35000, ge=0)
    min_forks: int = Field(default=10000, ge=0)


class RejectReason(str, Enum):
    CONTRIBUTORS = "contributors"
    COMMITS = "commits"
    STARS = "stars"
    FORKS = "forks"


class FilterDecision(BaseModel):
    model_config = ConfigDict(frozen=True)

    accepted: bool
    reason: Optional[RejectReason] = None


class MiningConfig(BaseModel):
    """マイニング設定（メソッド・ネスト関数はデフォルトで含める）"""
    model_config = ConfigDict(frozen=True)

    include_methods: bool = True
    include_nested: bool = True
    min_chars: int = Field(default=1, ge=1)
    exclude: list[str] = []
    workers: int = Field(default=4, ge=1)


class SampleOrigin(BaseModel):
    model_config = ConfigDict(frozen=True)

    repo_id: str
    file_path: str
    qualified_name: str


class CorpusSample(BaseModel):
    """Alpaca 形式の学習ペア1件"""
    model_config = ConfigDict(frozen=True)

    instruction: str
    response: str
    origin: SampleOrigin
    content_hash: str


class MiningStats(BaseModel):
    """マイニング統計（stats サイドカーにそのまま書き出す）"""
    model_config = ConfigDict(frozen=True)

    repos_seen: int = 0
    repos_accepted: int = 0
    files_seen: int = 0
    unreadable_dirs: int = 0  # 読めずに飛ばしたサブディレクトリ
    files_parsed: int = 0
    parse_failures: int = 0
    functions_seen: int = 0
    functions_with_docstring: int = 0
    functions_filtered: int = 0
    duplicates_removed: int = 0
    samples_exported: int = 0

    def merge(self, other: "MiningStats") -> "MiningStats":
        return MiningStats(**{
            name: getattr(self, name) + getattr(other, name)
            for name in MiningStats.model_fields
        })

    def check_invariants(self) -> None:
        """統計の算術的不変条件を検証する（満たさなければ AssertionError）"""
        assert self.files_seen == self.files_parsed + self.parse_failures, (
            f"files_seen {self.files_seen} != files_parsed {self.files_parsed} "
            f"+ parse_failures {self.parse_failures}"
        )
        expected = self.functions_with_docstring - self.duplicates_removed - self.functions_filtered
        assert self.samples_exported == expected, (
            f"samples_exported {self.samples_exported} != {expected}"
        )
