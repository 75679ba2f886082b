import logging
from typing import Union

LOG_FORMAT = '[%(asctime)s] %(levelname)s - %(name)s - %(message)s'


def resolve_level(level: Union[int, str]) -> int:
    if isinstance(level, int):
        return level
    resolved = logging.getLevelName(str(level).upper())
    return resolved if isinstance(resolved, int) else logging.INFO


def get_logger(name="rads", level: Union[int, str] = logging.INFO):
    level = resolve_level(level)
    logger = logging.getLogger(name)
    logger.setLevel(level)

    if not logger.handlers:
        ch = logging.StreamHandler()
        ch.setLevel(level)
        formatter = logging.Formatter(LOG_FORMAT)
        ch.setFormatter(formatter)
        logger.addHandler(ch)

    return logger


def configure_root(level: Union[int, str] = logging.INFO):
    """Attach the project handler to every package logger used by the CLI."""
    for package in ("graph", "planner", "enumeration", "transport", "workers", "ingestion", "ops", "utils"):
        get_logger(package, level)
