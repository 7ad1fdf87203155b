import logging
from typing import Optional

LOGGER_NAME = "spikeslab_ar"
LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'


class RunLogger:
    """Console and optional file logging for a command run"""

    def __init__(self, log_file: Optional[str] = None, verbose: bool = False):
        self.logger = logging.getLogger(LOGGER_NAME)
        self.logger.setLevel(logging.DEBUG)

        # Handlers are owned by this class; drop the ones a previous run attached
        for handler in list(self.logger.handlers):
            if getattr(handler, "_spikeslab_owned", False):
                self.logger.removeHandler(handler)
                handler.close()

        # Console handler
        console_handler = logging.StreamHandler()
        console_handler.setLevel(logging.DEBUG if verbose else logging.INFO)
        console_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        console_handler._spikeslab_owned = True
        self.logger.addHandler(console_handler)

        # File handler
        if log_file:
            file_handler = logging.FileHandler(log_file, encoding='utf-8')
            file_handler.setLevel(logging.DEBUG)
            file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
            file_handler._spikeslab_owned = True
            self.logger.addHandler(file_handler)

    def info(self, message: str):
        self.logger.info(message)

    def error(self, message: str):
        self.logger.error(message)

    def warning(self, message: str):
        self.logger.warning(message)

    def debug(self, message: str):
        self.logger.debug(message)

    def banner(self, title: str, lines: dict):
        """Summary block printed at the end of a command"""
        self.logger.info("=" * 50)
        self.logger.info(title)
        self.logger.info("=" * 50)
        for key, value in lines.items():
            self.logger.info(f"{key}: {value}")
        self.logger.info("=" * 50)


def get_logger(module: str) -> logging.Logger:
    """Child logger used by library modules; handlers live on the parent."""
    return logging.getLogger(f"{LOGGER_NAME}.{module}")
