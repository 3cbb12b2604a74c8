"""Backend selection for the numeric kernels.

Set ``RIBBONREC_NUMBA=0`` to force the pure-numpy kernels. Numba is used
otherwise, when it imports.
"""
import os

_FLAG = os.environ.get("RIBBONREC_NUMBA", "1").strip().lower()

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _FLAG not in ("0", "false", "no", "off")
