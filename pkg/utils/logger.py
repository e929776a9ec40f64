"""
Centralized logging configuration.
Every package logs through here so console and file output share one format.
"""
import logging
import sys
from pathlib import Path
from datetime import datetime
from typing import Optional

from config import settings

# Global logger registry
_loggers = {}

# Run-wide file handler, shared by every registered logger once a run starts
_run_file_handler: Optional[logging.FileHandler] = None


def _formatter() -> logging.Formatter:
    return logging.Formatter(settings.LOG_FORMAT, datefmt=settings.LOG_DATE_FORMAT)


def get_logger(name: str,
               log_file: Optional[str] = None,
               level: Optional[str] = None) -> logging.Logger:
    """
    Get or create a logger with consistent formatting.

    Args:
        name: Logger name (usually __name__)
        log_file: Optional log file path
        level: Logging level, defaults to settings.LOG_LEVEL

    Returns:
        Configured logger instance
    """
    if name in _loggers and log_file is None:
        return _loggers[name]

    level = (level or settings.LOG_LEVEL).upper()
    logger = logging.getLogger(name)
    logger.setLevel(getattr(logging, level))
    logger.propagate = False

    # Console goes to stderr so stdout stays machine-readable for the CLI
    if not logger.handlers:
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(getattr(logging, level))
        console_handler.setFormatter(_formatter())
        logger.addHandler(console_handler)

    if log_file:
        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)

        file_handler = logging.FileHandler(log_file)
        file_handler.setLevel(logging.DEBUG)  # File gets all logs
        file_handler.setFormatter(_formatter())
        logger.addHandler(file_handler)
    elif _run_file_handler is not None and _run_file_handler not in logger.handlers:
        logger.addHandler(_run_file_handler)

    _loggers[name] = logger
    return logger


def setup_logger_for_module(module_name: str,
                            logs_dir: Path,
                            prefix: str = '') -> logging.Logger:
    """
    Setup the run logger with a timestamped file.

    The same file also receives records from every logger obtained through
    get_logger, before or after this call.

    Args:
        module_name: Name of the run (used in the file name)
        logs_dir: Directory for log files
        prefix: Optional prefix for log filename

    Returns:
        Configured logger
    """
    global _run_file_handler

    timestamp = datetime.now().strftime('%Y%m%d_%H%M%S')
    log_file = logs_dir / f"{prefix}{module_name}_{timestamp}.log"
    log_file.parent.mkdir(parents=True, exist_ok=True)

    if _run_file_handler is not None:
        _run_file_handler.close()
        for logger in _loggers.values():
            if _run_file_handler in logger.handlers:
                logger.removeHandler(_run_file_handler)

    _run_file_handler = logging.FileHandler(log_file)
    _run_file_handler.setLevel(logging.DEBUG)
    _run_file_handler.setFormatter(_formatter())
    for logger in _loggers.values():
        logger.addHandler(_run_file_handler)

    return get_logger(module_name)


class LoggerContextManager:
    """Context manager for temporary log level changes."""

    def __init__(self, logger: logging.Logger, level: str):
        self.logger = logger
        self.new_level = getattr(logging, level.upper())
        self.old_level = None

    def __enter__(self):
        self.old_level = self.logger.level
        self.logger.setLevel(self.new_level)
        return self.logger

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.logger.setLevel(self.old_level)
