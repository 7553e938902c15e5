"""
Crash log for CLI runs.

Every entry names the polarkit invocation that died and whatever the running
command noted about its input (corpus name, ray counts), so a
crash.log line can be replayed from the shell:

    === Unhandled exception @ 2024-05-01T10:12:03 ===
    command: polarkit sweep --corpus mixed --center both
    corpus: mixed-200-s42
    origin: polarkit/codec.py:151 in encode
    Traceback (most recent call last):
    ...
"""

from __future__ import annotations

import faulthandler
import shlex
import sys
import threading
import traceback
from datetime import datetime
from pathlib import Path
from typing import Dict, Optional, Sequence

from .config import CRASH_LOG_FILE, ensure_parent, user_file

LOG_PATH = user_file(CRASH_LOG_FILE)
PROG = "polarkit"

_command = PROG
_notes: Dict[str, str] = {}
_lock = threading.Lock()
_orig_sys_hook = None
_orig_thread_hook = None
_faulthandler_file = None


def _append(lines: Sequence[str]) -> None:
    try:
        ensure_parent(LOG_PATH)
        with _lock, Path(LOG_PATH).open("a", encoding="utf-8") as f:
            f.write("\n".join(lines) + "\n")
    except Exception:
        pass


def command_line(argv: Optional[Sequence[str]]) -> str:
    args = [str(a) for a in (argv or [])]
    return " ".join([PROG] + [shlex.quote(a) for a in args])


def note(key: str, value) -> None:
    """Attach a detail of the running command to any later crash entry."""
    with _lock:
        _notes[str(key)] = str(value)


def clear_notes() -> None:
    with _lock:
        _notes.clear()


def _origin(exc_tb) -> Optional[str]:
    # innermost frame inside the package
    frames = traceback.extract_tb(exc_tb) if exc_tb is not None else []
    for fr in reversed(frames):
        parts = Path(fr.filename).parts
        if PROG in parts:
            start = len(parts) - 1 - parts[::-1].index(PROG)
            rel = "/".join(parts[start:])
            return f"{rel}:{fr.lineno} in {fr.name}"
    return None


def crash_header(prefix: str, exc_tb=None) -> list:
    ts = datetime.now().isoformat(timespec="seconds")
    lines = [f"=== {prefix} @ {ts} ===", f"command: {_command}"]
    with _lock:
        lines.extend(f"{k}: {v}" for k, v in _notes.items())
    origin = _origin(exc_tb)
    if origin:
        lines.append(f"origin: {origin}")
    return lines


def log_exception(prefix: str, exc_type, exc_value, exc_tb) -> None:
    lines = crash_header(prefix, exc_tb)
    try:
        lines.append("".join(traceback.format_exception(exc_type, exc_value, exc_tb)).rstrip())
    except Exception:
        lines.append(f"[crash_reporter] failed to format traceback for {exc_type}")
    lines.append("")
    _append(lines)


def _sys_excepthook(exc_type, exc_value, exc_tb) -> None:
    log_exception("Unhandled exception", exc_type, exc_value, exc_tb)
    if callable(_orig_sys_hook):
        _orig_sys_hook(exc_type, exc_value, exc_tb)


def _thread_excepthook(args) -> None:
    name = getattr(args.thread, "name", "worker")
    try:
        log_exception(f"Unhandled exception in {name}", args.exc_type, args.exc_value, args.exc_traceback)
    finally:
        if callable(_orig_thread_hook):
            _orig_thread_hook(args)


def install(argv: Optional[Sequence[str]] = None, log_path: Optional[Path] = None) -> Path:
    """Record the invocation and route unhandled exceptions (main thread and workers) to the crash log."""
    global LOG_PATH, _command, _orig_sys_hook, _orig_thread_hook, _faulthandler_file

    if log_path is not None:
        LOG_PATH = Path(log_path)
    LOG_PATH = ensure_parent(Path(LOG_PATH))
    _command = command_line(sys.argv[1:] if argv is None else argv)
    clear_notes()

    if _faulthandler_file is None:
        try:
            _faulthandler_file = LOG_PATH.open("a", encoding="utf-8")
            faulthandler.enable(_faulthandler_file, all_threads=True)
        except Exception:
            _faulthandler_file = None

    if sys.excepthook is not _sys_excepthook:
        _orig_sys_hook = sys.excepthook
        sys.excepthook = _sys_excepthook
    if threading.excepthook is not _thread_excepthook:
        _orig_thread_hook = threading.excepthook
        threading.excepthook = _thread_excepthook
    return LOG_PATH
