"""Backend selection for the hot pairwise-similarity kernels.

Two interchangeable implementations exist: numba-jitted loops
(:mod:`trainspot._kernels`) and a chunked vectorized numpy fallback
(:mod:`trainspot._kernels_np`). The ``TRAINSPOT_BACKEND`` environment
variable picks one:

* ``numba`` — require numba, raise if it cannot be imported;
* ``numpy`` — force the fallback, never touch numba;
* ``auto`` (default, or unset) — numba when importable, numpy otherwise.
"""

from __future__ import annotations

import os

_REQUESTED = os.environ.get("TRAINSPOT_BACKEND", "auto").strip().lower()
if _REQUESTED not in ("auto", "numba", "numpy"):
    raise RuntimeError(
        f"TRAINSPOT_BACKEND={_REQUESTED!r} not understood (use auto, numba or numpy)"
    )


def _passthrough_jit(*args, **kwargs):
    """Stand-in for numba.njit when jitting is unavailable or disabled."""
    if args and callable(args[0]) and not kwargs:
        return args[0]

    def wrap(fn):
        return fn

    return wrap


HAS_NUMBA = False
if _REQUESTED in ("auto", "numba"):
    try:
        from numba import njit  # noqa: F401

        HAS_NUMBA = True
    except ImportError:
        if _REQUESTED == "numba":
            raise

if not HAS_NUMBA:
    njit = _passthrough_jit  # type: ignore[assignment]

ACTIVE_BACKEND = "numba" if (HAS_NUMBA and _REQUESTED != "numpy") else "numpy"
