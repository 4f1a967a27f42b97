"""Select the compiled ground kernel when available.

Set ``PTP_PURE_PYTHON=1`` to force the pure-Python fallback.
"""

import os

from . import _ground_py

PURE_PYTHON = os.environ.get("PTP_PURE_PYTHON", "") not in ("", "0")

if PURE_PYTHON:
    Kernel = _ground_py.Kernel
    COMPILED = False
else:
    try:
        from ._ground_ext import Kernel  # noqa: F401
        COMPILED = True
    except ImportError:
        Kernel = _ground_py.Kernel
        COMPILED = False

logaddexp = _ground_py.logaddexp
ResourceLimit = _ground_py.ResourceLimit
NEG_INF = _ground_py.NEG_INF
