"""Optional numba acceleration and worker-count policy.

Hot kernels are written twice: a compiled loop (numba) and a vectorised
NumPy version.  ``CATLIFT_DISABLE_NUMBA=1`` forces the NumPy path even
when numba is importable, which is how the benchmark and the test-suite
exercise both implementations.
"""

from __future__ import annotations

import os

_TRUTHY = {"1", "true", "yes", "on"}


def _env_flag(name: str) -> bool:
    return os.environ.get(name, "").strip().lower() in _TRUTHY


try:  # pragma: no cover - depends on the environment
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

NUMBA_DISABLED = _env_flag("CATLIFT_DISABLE_NUMBA")
USE_NUMBA = HAVE_NUMBA and not NUMBA_DISABLED


def njit(**options):
    """Compile with numba when available; return ``None`` otherwise.

    Callers keep the pure-Python function around and choose the backend
    themselves, so a missing numba never breaks an import.
    """

    def wrap(fn):
        if not HAVE_NUMBA:
            return None
        return numba.njit(**options)(fn)

    return wrap


def worker_count(requested: int | None = None) -> int:
    """Number of worker threads, capped by ``CATLIFT_THREADS``.

    Parameters
    ----------
    requested : int, optional
        Caller preference.  Defaults to the CPU count.

    Returns
    -------
    int
        At least 1.
    """
    n = requested if requested is not None else (os.cpu_count() or 1)
    cap = os.environ.get("CATLIFT_THREADS", "").strip()
    if cap:
        try:
            n = min(n, int(cap))
        except ValueError as exc:
            raise ValueError(f"CATLIFT_THREADS must be an integer, got {cap!r}") from exc
    return max(1, int(n))
