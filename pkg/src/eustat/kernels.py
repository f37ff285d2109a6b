"""Backend selection for the hot kernels.

The compiled extension is preferred when importable; set EUSTAT_KERNELS=python
to force the numpy fallback (the benchmark and the cross-backend tests do).
Both backends are bitwise-identical by construction, so the choice never
changes results.
"""

import os

_choice = os.environ.get("EUSTAT_KERNELS", "auto").strip().lower()

if _choice == "python":
    from eustat import _kernels_py as _impl
elif _choice in ("auto", "cython"):
    try:
        from eustat import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        if _choice == "cython":
            raise
        from eustat import _kernels_py as _impl  # type: ignore[no-redef]
else:
    raise ValueError(f"EUSTAT_KERNELS must be auto, cython or python, got {_choice!r}")

backend = _impl.BACKEND
tree_sum = _impl.tree_sum
tree_dot = _impl.tree_dot
advection_products = _impl.advection_products


def available_backends():
    """Name -> module for every importable backend (used by the benchmark)."""
    from eustat import _kernels_py

    impls = {"python": _kernels_py}
    try:
        from eustat import _kernels

        impls["cython"] = _kernels
    except ImportError:
        pass
    return impls
