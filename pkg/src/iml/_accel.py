"""Backend selection for the numeric kernels.

``IML_BACKEND=numpy`` forces the pure-numpy path; the default is numba when
it imports cleanly.  ``IML_THREADS`` caps the worker threads used to run
independent transports concurrently.
"""
import logging
import os

log = logging.getLogger(__name__)

_requested = os.environ.get("IML_BACKEND", "numba").strip().lower()

if _requested not in ("numba", "numpy"):
    raise RuntimeError(f"IML_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

if _requested == "numba":
    try:
        from . import _kernels_numba as kernels
        BACKEND = "numba"
    except ImportError as exc:  # pragma: no cover - numba is a declared dependency
        log.warning("numba unavailable (%s); falling back to numpy kernels", exc)
        from . import _kernels_numpy as kernels
        BACKEND = "numpy"
else:
    from . import _kernels_numpy as kernels
    BACKEND = "numpy"


def max_threads() -> int:
    raw = os.environ.get("IML_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            log.warning("ignoring non-integer IML_THREADS=%r", raw)
    return max(1, os.cpu_count() or 1)


def get_kernels(name=None):
    """Kernel module for ``name`` ('numba'/'numpy'), default the active backend."""
    if name is None or name == BACKEND:
        return kernels
    if name == "numpy":
        from . import _kernels_numpy
        return _kernels_numpy
    if name == "numba":
        from . import _kernels_numba
        return _kernels_numba
    raise ValueError(name)
