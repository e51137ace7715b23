"""出力ファイルの書き込みヘルパー（一時ファイルに書いてから os.replace で置き換える）"""
import logging
import os
import tempfile
from pathlib import Path

from documint.exceptions import ExportError

logger = logging.getLogger(__name__)


def write_atomic(path: str | Path, data: bytes) -> int:
    """
    data を path に原子的に書き込む

    Returns:
        書き込んだバイト数

    Raises:
        ExportError: 書き込みまたはリネームに失敗した場合（途中のファイルは残さない）
    """
    target = Path(path)
    tmp_name = None
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(
            dir=target.parent, prefix=f".{target.name}.", suffix=".tmp", delete=False
        ) as tmp:
            tmp_name = tmp.name
            tmp.write(data)
            tmp.flush()
            os.fsync(tmp.fileno())
        os.replace(tmp_name, target)
    except OSError as e:
        if tmp_name and os.path.exists(tmp_name):
            os.unlink(tmp_name)
        logger.error(f"Failed to write {target}: {e}", exc_info=True)
        raise ExportError(f"cannot write {target}: {e}") from e
    logger.info(f"Wrote {target} ({len(data)} bytes)")
    return len(data)


def write_text_atomic(path: str | Path, text: str) -> int:
    return write_atomic(path, text.encode("utf-8"))
