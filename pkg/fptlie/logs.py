"""Per-environment file logging."""
import logging
import os

from .config import ENVIRONMENT, LOG_DIR, LOG_FILE, settings


def get_logger(name: str) -> logging.Logger:
    """Return the environment-scoped logger for a component, attaching the file handler once."""
    logger = logging.getLogger(f"fptlie.{name}_{ENVIRONMENT}")
    if logger.handlers:
        return logger

    logger.setLevel(settings.log_level.upper())

    os.makedirs(LOG_DIR, exist_ok=True)
    file_handler = logging.FileHandler(LOG_FILE, encoding='utf-8')
    file_handler.setLevel(settings.log_level.upper())

    # Include environment in log messages
    formatter = logging.Formatter(
        f'%(asctime)s - [{ENVIRONMENT.upper()}] - %(levelname)s - %(name)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )
    file_handler.setFormatter(formatter)
    logger.addHandler(file_handler)
    return logger


def set_level(level: str) -> None:
    """Change the level of every fptlie logger already created."""
    for logger_name in list(logging.root.manager.loggerDict):
        if logger_name.startswith("fptlie."):
            logger = logging.getLogger(logger_name)
            logger.setLevel(level.upper())
            for handler in logger.handlers:
                handler.setLevel(level.upper())
