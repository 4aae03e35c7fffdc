"""Process-level performance knobs.

Training cycles many multi-megabyte temporaries through numpy; with
glibc's default thresholds those allocations round-trip through mmap and
page faults dominate the step time.  Raising the malloc mmap/trim
thresholds keeps the buffers on the heap for reuse.  Best effort: silently
a no-op on non-glibc platforms.
"""

from __future__ import annotations

import ctypes

_M_TRIM_THRESHOLD = -1
_M_MMAP_THRESHOLD = -3
_tuned = False


def tune_allocator(threshold_bytes: int = 1 << 30) -> bool:
    """Raise malloc's mmap and trim thresholds once per process."""
    global _tuned
    if _tuned:
        return True
    try:
        libc = ctypes.CDLL("libc.so.6", use_errno=True)
        ok = bool(libc.mallopt(_M_MMAP_THRESHOLD, threshold_bytes))
        ok &= bool(libc.mallopt(_M_TRIM_THRESHOLD, threshold_bytes))
    except OSError:
        return False
    _tuned = ok
    return ok
