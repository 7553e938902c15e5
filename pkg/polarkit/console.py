import sys
from typing import Callable, Optional

_listener: Optional[Callable[[str], None]] = None


def set_listener(cb: Optional[Callable[[str], None]]) -> None:
    """Optional callback receiving every console line (tests, embedding apps)."""
    global _listener
    _listener = cb


def _notify(line: str) -> None:
    if _listener is not None:
        try:
            _listener(line)
        except Exception:
            pass


def dprint(tag: str, *args) -> None:
    try:
        msg = " ".join(str(a) for a in args)
        line = f"[{tag}] {msg}"
        print(line, flush=True)
        _notify(line)
    except Exception:
        pass


def eprint(message: str) -> None:
    # One line only; commands report failures this way before exiting with 2.
    line = f"[ERROR] {message}"
    try:
        print(line, file=sys.stderr, flush=True)
    except Exception:
        pass
    _notify(line)
