import logging
from datetime import datetime
from typing import Any

from errors.exceptions import IFSLabError

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def setup_logging(level: int | str = logging.INFO) -> None:
    logging.basicConfig(level=level, format=LOG_FORMAT)


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(name)


def _format_value(value: Any) -> str:
    if isinstance(value, dict) and "value" in value:
        text = _format_value(value["value"])
        if value.get("tolerance") is not None:
            text += f" (tol {value['tolerance']:g} from {value.get('source', '?')})"
        return text
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def log_run_start(command: str) -> datetime:
    logger = get_logger("ifslab")
    start_time = datetime.now()
    logger.info("=" * 60)
    logger.info(f"IFSLAB {command.upper()} - Starting")
    logger.info("=" * 60)
    return start_time


def log_run_end(command: str, start_time: datetime, summary: dict[str, Any]) -> None:
    logger = get_logger("ifslab")
    duration = (datetime.now() - start_time).total_seconds()

    logger.info("")
    logger.info("RUN SUMMARY")
    logger.info(f"Duration: {duration:.2f} seconds")

    if summary.get("metrics"):
        logger.info("")
        logger.info("Metrics:")
        for name, value in sorted(summary["metrics"].items()):
            logger.info(f"  {name}: {_format_value(value)}")

    if summary.get("flags"):
        logger.info("")
        logger.info("Checks:")
        for name, value in sorted(summary["flags"].items()):
            logger.info(f"  {name}: {'PASS' if value else 'FAIL'}")

    if summary.get("error_budget"):
        logger.info("")
        logger.info("Error budget:")
        for name, value in sorted(summary["error_budget"].items()):
            logger.info(f"  {name}: {_format_value(value)}")

    logger.info("=" * 60)
    if summary.get("reason"):
        logger.info(f"❌ IFSLAB {command.upper()} - FAILED ({summary['reason']['reason']})")
    else:
        logger.info(f"✅ IFSLAB {command.upper()} - COMPLETE")
    logger.info("=" * 60)


def log_numeric_warning(what: str, value: float, tolerance: float) -> None:
    logger = get_logger("ifslab")
    logger.warning(f"{what}: {value:.6g} exceeds tolerance {tolerance:g}")


def format_failure(command: str, error: BaseException) -> dict:
    if isinstance(error, IFSLabError):
        return {
            "command": command,
            "reason": error.reason,
            "message": str(error),
            "exit_code": error.exit_code,
            "details": error.details(),
        }
    return {
        "command": command,
        "reason": "internal error",
        "message": f"{type(error).__name__}: {error}",
        "exit_code": 1,
        "details": {},
    }
