# utils/exception_handler.py
import json
import logging
import sys
import traceback
from pathlib import Path
from typing import Any, Dict, Optional

from core.errors import MobForgeError

logger = logging.getLogger(__name__)

ERROR_FILE = "error.json"


def log_uncaught_exception(exc_type, exc_value, exc_tb):
    """Logs an unhandled exception with its traceback instead of printing it raw."""
    if issubclass(exc_type, KeyboardInterrupt):
        sys.__excepthook__(exc_type, exc_value, exc_tb)
        return
    tb_str = "".join(traceback.format_exception(exc_type, exc_value, exc_tb))
    logger.critical(f"Unhandled exception: {exc_value}\n{tb_str}")


def setup_exception_hook():
    """Installs a global exception hook that routes unhandled exceptions through logging."""
    sys.excepthook = log_uncaught_exception


def error_record(error: BaseException) -> Dict[str, Any]:
    if isinstance(error, MobForgeError):
        return error.to_record()
    return {"error": "unexpected_error", "message": str(error) or type(error).__name__,
            "context": {"type": type(error).__name__}}


def report_error(error: BaseException, output_dir: Optional[Path] = None) -> Dict[str, Any]:
    """Prints the machine-readable record as one JSON line on stderr and writes error.json."""
    record = error_record(error)
    line = json.dumps(record, ensure_ascii=False, default=str)
    print(line, file=sys.stderr)
    if output_dir is not None:
        try:
            path = Path(output_dir) / ERROR_FILE
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(line + "\n", encoding="utf-8")
        except OSError as e:
            logger.error(f"Could not write error record to {output_dir}: {e}")
    return record
