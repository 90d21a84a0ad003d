"""
Logging configuration for the fcflow solver.
Uses loguru for enhanced logging capabilities.
"""
import sys
from pathlib import Path
from typing import Optional, TextIO

from loguru import logger

from app.core.config import settings

_CONSOLE_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>"
)
_FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{function}:{line} - {message}"


def setup_logging(stream: Optional[TextIO] = None) -> None:
    """
    Configure logging with appropriate format and level based on environment.

    Args:
        stream: Console sink (stdout by default; the CLI logs to stderr).
    """
    # Remove default logger
    logger.remove()

    log_level = "DEBUG" if settings.app_env == "dev" else "INFO"

    logger.add(
        stream or sys.stdout,
        format=_CONSOLE_FORMAT,
        level=log_level,
        colorize=True,
    )

    if settings.app_env == "prod":
        logger.add(
            "logs/fcflow.log",
            rotation="500 MB",
            retention="10 days",
            level="INFO",
            format=_FILE_FORMAT,
        )

    logger.info(f"Logging configured for {settings.app_env} environment")


def add_run_log(run_dir: Path) -> int:
    """Attach a file sink for one run; returns the sink id for later removal."""
    run_dir.mkdir(parents=True, exist_ok=True)
    return logger.add(run_dir / "run.log", level="DEBUG", format=_FILE_FORMAT, enqueue=True)


def remove_run_log(sink_id: int) -> None:
    try:
        logger.remove(sink_id)
    except ValueError:
        pass


# Export configured logger
__all__ = ["logger", "setup_logging", "add_run_log", "remove_run_log"]
