import logging
import os

from config.config import get_parameter


class Logger:

    def __init__(self, name: str) -> None:
        self._logger = logging.getLogger(f"fmuad.{name}")

        level_str = os.getenv("LOG_LEVEL", get_parameter("logging.level", "INFO"))
        level = getattr(logging, level_str.upper(), logging.INFO)
        self._logger.setLevel(level)
        self._logger.propagate = False

        if not self._logger.handlers:
            sh = logging.StreamHandler()
            formatter = logging.Formatter(
                "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
            )
            sh.setFormatter(formatter)
            self._logger.addHandler(sh)

    @property
    def level(self) -> int:
        return self._logger.level

    def debug(self, msg):
        self._logger.debug(msg)

    def info(self, msg):
        self._logger.info(msg)

    def warn(self, msg):
        self._logger.warning(msg)

    def error(self, msg, e=None):
        if e:
            self._logger.error(f"{msg}: {e}")
        else:
            self._logger.error(msg)

    def exception(self, msg):
        self._logger.exception(msg)


def get_logger(name="fmuad"):
    return Logger(name)
