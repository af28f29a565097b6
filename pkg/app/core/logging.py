import logging
import sys

from loguru import logger

from app.core.config import settings


class InterceptHandler(logging.Handler):
    def emit(self, record):
        # Get corresponding Loguru level
        try:
            level = logger.level(record.levelname).name
        except ValueError:
            level = record.levelno

        # Find caller to get correct stack depth
        frame, depth = logging.currentframe(), 2
        while frame.f_back and frame.f_code.co_filename == logging.__file__:
            frame = frame.f_back
            depth += 1

        logger.opt(depth=depth, exception=record.exc_info).log(
            level, record.getMessage()
        )


def setup_logging(level: str | None = None):
    level = (level or settings.log_level).upper()

    # Remove existing handlers
    for handler in logging.root.handlers[:]:
        logging.root.removeHandler(handler)

    # Intercept standard logging (numpy/hypothesis warnings end up here)
    logging.basicConfig(handlers=[InterceptHandler()], level=logging.INFO)

    logger.remove()
    logger.add(sys.stderr, level=level)
    if settings.log_file:
        logger.add(
            settings.log_file,
            rotation=settings.log_rotation,
            compression="zip",
            level=level,
            backtrace=True,
            diagnose=settings.debug,
        )
