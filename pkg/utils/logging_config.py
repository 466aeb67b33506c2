import sys
import logging
from pathlib import Path
from typing import Optional

from config.settings import get_settings

settings = get_settings()

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"
# chatty at DEBUG and never useful for a training run
QUIET_LOGGERS = ("PIL", "trimesh")

_LEVELS = {
    "DEBUG": logging.DEBUG,
    "INFO": logging.INFO,
    "WARNING": logging.WARNING,
    "TEST": logging.ERROR,
}


def get_logger(name=None):
    """Get a logger for the given name/module."""
    return logging.getLogger(name)


def setup_logging(level="INFO", logs_dir=None):
    """
    Configure the root logger once per process: console at INFO (DEBUG when
    debug is enabled), and everything to <logs_dir>/app.log.
    """
    debug_enabled = settings.processing.debug
    log_level = logging.DEBUG if debug_enabled else _LEVELS.get(level, logging.INFO)

    root = logging.getLogger()
    root.setLevel(log_level)
    for name in QUIET_LOGGERS:
        logging.getLogger(name).setLevel(logging.WARNING)

    if root.handlers:
        return

    formatter = logging.Formatter(LOG_FORMAT)
    console = logging.StreamHandler(sys.stdout)
    console.setLevel(logging.DEBUG if debug_enabled else logging.INFO)
    console.setFormatter(formatter)
    root.addHandler(console)

    log_file = Path(logs_dir or settings.directories.logs_dir) / "app.log"
    log_file.parent.mkdir(parents=True, exist_ok=True)
    app_log = logging.FileHandler(log_file)
    app_log.setLevel(logging.DEBUG)
    app_log.setFormatter(formatter)
    root.addHandler(app_log)


def attach_run_log(log_file: Path) -> logging.Handler:
    """Mirror all records into a per-command log file until detach_run_log."""
    log_file = Path(log_file)
    log_file.parent.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(log_file, mode="w")
    handler.setLevel(logging.DEBUG)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logging.getLogger().addHandler(handler)
    return handler


def detach_run_log(handler: Optional[logging.Handler]) -> None:
    if handler is None:
        return
    logging.getLogger().removeHandler(handler)
    handler.close()


def format_losses_for_log(losses: dict) -> str:
    """Render a dict of named loss terms as a compact single line."""
    return ", ".join(f"{name}={value:.6f}" for name, value in losses.items())
