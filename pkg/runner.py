"""
Run management shared by every command.

A run directory holds checkpoints/, logs/, outputs/ and one manifest per
command. Concurrent commands on the same run directory are rejected through
an exclusive lock file.
"""

import os
from pathlib import Path
from typing import Optional

from config.settings import AppSettings, ConfigLoader
from models.reports import RunManifest
from utils.exceptions import DependencyError, InvalidInput, InvariantViolation, raise_invalid_input
from utils.file_utils import write_json_atomic
from utils.logging_config import attach_run_log, detach_run_log, get_logger

logger = get_logger(__name__)

LOCK_FILE = ".lock"

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DEPENDENCY = 3
EXIT_INTERNAL = 4


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, DependencyError):
        return EXIT_DEPENDENCY
    if isinstance(exc, InvariantViolation):
        return EXIT_INTERNAL
    if isinstance(exc, (InvalidInput, ValueError, FileNotFoundError)):
        return EXIT_INPUT
    return EXIT_INTERNAL


class RunContext:
    """
    Lock a run directory for one command and write its manifest on exit.

    Usage:
        with RunContext("generate", settings) as run:
            ...
            run.manifest.add_artifact(path)
    """

    def __init__(self, command: str, settings: AppSettings):
        self.command = command
        self.settings = settings
        self.run_dir = Path(settings.directories.run_dir)
        self.lock_path = self.run_dir / LOCK_FILE
        self.manifest = RunManifest(
            command=command, config=settings.snapshot(), version=settings.app_version
        )
        self._locked = False
        self._log_handler = None

    @property
    def manifest_path(self) -> Path:
        return self.run_dir / f"manifest_{self.command.replace(' ', '_')}.json"

    @property
    def log_path(self) -> Path:
        return self.run_dir / "logs" / f"{self.command.replace(' ', '_')}.log"

    def output_dir(self, out: Optional[Path] = None) -> Path:
        path = Path(out) if out else self.run_dir / "outputs" / self.command.split()[0]
        path.mkdir(parents=True, exist_ok=True)
        return path

    def acquire(self) -> None:
        self.run_dir.mkdir(parents=True, exist_ok=True)
        try:
            fd = os.open(self.lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise_invalid_input(
                f"Run directory {self.run_dir} is locked by another command ({self.lock_path})"
            )
        with os.fdopen(fd, "w") as f:
            f.write(f"{os.getpid()} {self.command}\n")
        self._locked = True

    def release(self) -> None:
        if self._locked:
            self.lock_path.unlink(missing_ok=True)
            self._locked = False

    def __enter__(self) -> "RunContext":
        self.acquire()
        try:
            self._log_handler = attach_run_log(self.log_path)
        except BaseException:
            self.release()
            raise
        logger.info(f"[*] {self.command} in {self.run_dir}")
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        try:
            self.manifest.finish("ok" if exc is None else f"failed: {exc}")
            config_path = ConfigLoader.dump(self.settings, self.run_dir / "config.ini")
            self.manifest.add_artifact(config_path)
            self.manifest.add_artifact(self.log_path)
            write_json_atomic(self.manifest_path, self.manifest.to_dict())
        finally:
            detach_run_log(self._log_handler)
            self._log_handler = None
            self.release()
        return False
