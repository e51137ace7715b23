"""
documint の例外階層

ライブラリ層は例外を送出するだけで、終了コードへの変換は main.run が担当する。
"""


class DocumintError(Exception):
    """ドメインエラーの基底クラス（CLI では終了コード 1）"""

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class UsageError(DocumintError):
    """フラグ値の検証エラー（CLI では終了コード 2）"""


class ParseFailure(DocumintError):
    """ファイル単位の構文解析失敗"""

    def __init__(self, reason: str, line: int | None = None):
        location = f" (line {line})" if line is not None else ""
        super().__init__(f"{reason}{location}")
        self.reason = reason
        self.line = line


class EmptyText(DocumintError):
    pass


class DimensionMismatch(DocumintError):
    pass


class ZeroVector(DocumintError):
    pass


class NonPositiveBase(DocumintError):
    pass


class EmptyRun(DocumintError):
    pass


class TransportFailure(DocumintError):
    """外部エンドポイントへの通信失敗（リトライ後）"""

    def __init__(self, detail: str, status: int | None = None):
        status_text = f" [HTTP {status}]" if status is not None else ""
        super().__init__(f"{detail}{status_text}")
        self.status = status


class ContractViolation(DocumintError):
    """エンドポイントの応答がワイヤ契約に反する"""


class WalkError(DocumintError):
    pass


class ExportError(DocumintError):
    pass


class MiningError(DocumintError):
    pass


class SchemaError(DocumintError):
    """入力ファイルのスキーマ違反。最初に問題となった task_id を保持する"""

    def __init__(self, detail: str, task_id: str | None = None):
        prefix = f"task '{task_id}': " if task_id is not None else ""
        super().__init__(f"{prefix}{detail}")
        self.task_id = task_id


class MissingGeneration(DocumintError):
    def __init__(self, task_id: str, model_id: str | None = None):
        model_text = f" for model '{model_id}'" if model_id else ""
        super().__init__(f"No generation found for task '{task_id}'{model_text}")
        self.task_id = task_id
        self.model_id = model_id


class TaskSetMismatch(DocumintError):
    pass


class ScoringError(DocumintError):
    def __init__(self, task_id: str, cause: Exception):
        super().__init__(f"Scoring failed for task '{task_id}': {cause}")
        self.task_id = task_id
        self.cause = cause
