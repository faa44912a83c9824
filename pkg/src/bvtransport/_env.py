"""Process-level knobs, read once at import.

BVT_NUMBA   "1" force the jitted lane, "0" force the numpy lane, anything
            else (or unset) picks numba when it imports cleanly.
BVT_THREADS cap on worker threads used by the suite runner; default is the
            machine's CPU count.
"""

import os


def numba_preference() -> str:
    val = os.environ.get("BVT_NUMBA", "auto").strip().lower()
    if val in ("1", "true", "yes", "numba"):
        return "numba"
    if val in ("0", "false", "no", "numpy"):
        return "numpy"
    return "auto"


def thread_cap() -> int:
    val = os.environ.get("BVT_THREADS", "").strip()
    if val:
        try:
            n = int(val)
            if n >= 1:
                return n
        except ValueError:
            pass
    return os.cpu_count() or 1
