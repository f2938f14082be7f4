import logging
import os
import sys
from logging.handlers import RotatingFileHandler
from typing import Optional

import structlog

LOG_FILE = os.environ.get("HMOCMA_LOG_FILE", "")
LOG_LEVEL = os.environ.get("HMOCMA_LOG_LEVEL", "WARNING").upper()
MAX_LOG_SIZE = 5 * 1024 * 1024  # 5 MB
BACKUP_COUNT = 7

PROCESSORS = [
    structlog.stdlib.filter_by_level,
    structlog.stdlib.add_logger_name,
    structlog.stdlib.add_log_level,
    structlog.processors.TimeStamper(fmt="iso"),
    structlog.processors.StackInfoRenderer(),
    structlog.processors.format_exc_info,
    structlog.processors.UnicodeDecoder(),
    structlog.processors.JSONRenderer(),
]


def configure_logging(level: str = LOG_LEVEL, log_file: Optional[str] = LOG_FILE):
    """JSON events on stderr, and in a rotating file when ``log_file`` is set.

    stdout stays free for the command line tables.
    """
    structlog.configure(
        processors=PROCESSORS,
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )

    root_logger = logging.getLogger()
    root_logger.setLevel(getattr(logging, level, logging.WARNING))
    root_logger.addHandler(logging.StreamHandler(sys.stderr))
    if log_file:
        os.makedirs(os.path.dirname(log_file) or ".", exist_ok=True)
        root_logger.addHandler(
            RotatingFileHandler(
                log_file, maxBytes=MAX_LOG_SIZE, backupCount=BACKUP_COUNT
            )
        )
    root_logger.info("Logging system initialized")


def set_level(level: int) -> None:
    logging.getLogger().setLevel(level)


configure_logging()


def get_logger(name: str):
    """
    Get a logger instance for the given name.

    :param name: The name of the logger, typically __name__ of the module
    :return: A structured logger instance
    """
    return structlog.get_logger(name)
