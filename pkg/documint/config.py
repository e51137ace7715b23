from pydantic_settings import BaseSettings, SettingsConfigDict
import logging


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        case_sensitive=True,
        extra="ignore",
    )

    # 外部エンドポイント（未設定ならビルトイン/事前生成ファイルを使う）
    DOCUMINT_EMBED_URL: str | None = None
    DOCUMINT_GEN_URL: str | None = None

    # HTTP
    DOCUMINT_HTTP_TIMEOUT_SECONDS: float = 30.0
    DOCUMINT_MAX_IN_FLIGHT: int = 4

    # Embedding
    DOCUMINT_EMBED_DIMENSION: int = 256
    DOCUMINT_EMBED_BATCH_SIZE: int = 32

    # Corpus mining
    DOCUMINT_WORKERS: int = 4

    # Application
    DOCUMINT_LOG_LEVEL: str = "info"

    @property
    def log_level_value(self) -> int:
        return parse_log_level(self.DOCUMINT_LOG_LEVEL)


LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


def parse_log_level(name: str) -> int:
    try:
        return LOG_LEVELS[name.strip().lower()]
    except KeyError:
        raise ValueError(f"Unknown log level '{name}'. Choose from: {', '.join(LOG_LEVELS)}") from None
