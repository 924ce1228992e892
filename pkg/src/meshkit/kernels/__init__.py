"""Hot loops with a numba backend and a pure numpy fallback.

The numba backend is used when numba imports cleanly, unless the
environment variable ``MESHKIT_DISABLE_NUMBA`` is set to a truthy value
(``1``, ``true``, ``yes``).  The choice is made once, at import time.
"""

import logging
import os

from . import _numpy as numpy_backend

log = logging.getLogger(__name__)

QUAD, TRI_UPPER, TRI_LOWER = numpy_backend.QUAD, numpy_backend.TRI_UPPER, numpy_backend.TRI_LOWER


def _numba_disabled():
    return os.environ.get("MESHKIT_DISABLE_NUMBA", "0").strip().lower() in ("1", "true", "yes", "on")


try:
    from . import _numba as numba_backend
except ImportError:  # numba missing or broken
    numba_backend = None

if numba_backend is not None and not _numba_disabled():
    backend = numba_backend
    BACKEND = "numba"
else:
    backend = numpy_backend
    BACKEND = "numpy"

log.debug("meshkit kernels backend: %s", BACKEND)

legendre_colat_roots = backend.legendre_colat_roots
legendre_eval = backend.legendre_eval
tessellate_strip = backend.tessellate_strip
accumulate_gradient = backend.accumulate_gradient
accumulate_flux = backend.accumulate_flux

__all__ = [
    "BACKEND",
    "QUAD",
    "TRI_LOWER",
    "TRI_UPPER",
    "accumulate_flux",
    "accumulate_gradient",
    "backend",
    "legendre_colat_roots",
    "legendre_eval",
    "numba_backend",
    "numpy_backend",
    "tessellate_strip",
]
