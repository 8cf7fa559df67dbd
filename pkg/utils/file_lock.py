"""
Report file locking

Concurrent hazeorder runs may append to the same CSV report or rewrite the
same JSON config. Writes go through a sidecar ``.lock`` file and a temp file
that replaces the target atomically.
"""
import logging
import os
import sys
import time
from contextlib import contextmanager
from pathlib import Path

logger = logging.getLogger(__name__)

LOCK_POLL_SECONDS = 0.05


def _lock_path(target: Path) -> Path:
    return Path(str(target) + '.lock')


if sys.platform == 'win32':
    import msvcrt

    def _try_lock(handle) -> None:
        msvcrt.locking(handle.fileno(), msvcrt.LK_NBLCK, 1)

    def _unlock(handle) -> None:
        msvcrt.locking(handle.fileno(), msvcrt.LK_UNLCK, 1)

else:
    import fcntl

    def _try_lock(handle) -> None:
        fcntl.flock(handle.fileno(), fcntl.LOCK_EX | fcntl.LOCK_NB)

    def _unlock(handle) -> None:
        fcntl.flock(handle.fileno(), fcntl.LOCK_UN)


def _is_current(handle, lock_file: Path) -> bool:
    # a previous holder may have removed the lock file after we opened it
    try:
        return os.stat(lock_file).st_ino == os.fstat(handle.fileno()).st_ino
    except FileNotFoundError:
        return False


@contextmanager
def file_lock(file_path: Path, timeout: float = 10.0):
    """
    Hold an exclusive lock on ``file_path`` for the duration of the block.

    Args:
        file_path: File being protected (the lock lives next to it)
        timeout: Seconds to wait before giving up

    Raises:
        TimeoutError: If the lock is still held elsewhere after ``timeout``
    """
    file_path = Path(file_path)
    lock_file = _lock_path(file_path)
    lock_file.parent.mkdir(parents=True, exist_ok=True)
    deadline = time.monotonic() + timeout
    handle = None

    try:
        while True:
            handle = open(lock_file, 'a')
            try:
                _try_lock(handle)
            except OSError:
                handle.close()
                handle = None
                if time.monotonic() > deadline:
                    raise TimeoutError(f"Could not lock {file_path} within {timeout}s")
                time.sleep(LOCK_POLL_SECONDS)
                continue
            if _is_current(handle, lock_file):
                break
            _unlock(handle)
            handle.close()
            handle = None
        logger.debug(f"Acquired lock on {file_path}")
        yield
    finally:
        if handle is not None:
            try:
                lock_file.unlink()
            except OSError:
                pass
            try:
                _unlock(handle)
            except OSError:
                pass
            handle.close()
            logger.debug(f"Released lock on {file_path}")


def atomic_write(file_path: Path, data: str, encoding: str = 'utf-8') -> None:
    """Write text to a temp file, fsync it, then replace ``file_path``."""
    file_path = Path(file_path)
    temp_file = Path(str(file_path) + '.tmp')
    try:
        with open(temp_file, 'w', encoding=encoding) as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())
        temp_file.replace(file_path)
        logger.debug(f"Atomically wrote {file_path}")
    finally:
        if temp_file.exists():
            temp_file.unlink()


@contextmanager
def locked_csv_write(csv_path: Path, timeout: float = 10.0):
    """
    Lock a CSV report and yield a temp path to write the new contents to.

    Usage:
        with locked_csv_write(report_path) as temp_path:
            frame.to_csv(temp_path, index=False)

    The temp file replaces ``csv_path`` only if the block completes.
    """
    csv_path = Path(csv_path)
    with file_lock(csv_path, timeout=timeout):
        temp_file = Path(str(csv_path) + '.tmp')
        try:
            yield temp_file
            if temp_file.exists():
                temp_file.replace(csv_path)
                logger.debug(f"Updated report {csv_path}")
        finally:
            if temp_file.exists():
                temp_file.unlink()
