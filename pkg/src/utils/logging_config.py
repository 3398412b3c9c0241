import logging
from datetime import datetime

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
LOG_FILE = "rpf_planner.log"


def configure_logging(log_file: str | None = LOG_FILE, level: int = logging.INFO) -> None:
    """
    Configure the root logger once per process

    Args:
        log_file: File the records are appended to; None logs to the console only
        level: Root log level
    """
    handlers: list[logging.Handler] = [logging.StreamHandler()]
    if log_file:
        handlers.insert(0, logging.FileHandler(log_file, mode="a", encoding="utf-8"))

    logging.basicConfig(level=level, format=LOG_FORMAT, handlers=handlers)


def log_banner(logger: logging.Logger, title: str) -> None:
    """Write a start/stop banner the log viewer can split runs on"""
    logger.info("=" * 80)
    logger.info(title)
    logger.info(f"Time: {datetime.now().isoformat()}")
    logger.info("=" * 80)
