"""Select the numerical kernel implementation at import time.

The compiled extension is used when it was built; setting the environment
variable ``PCSYNTH_PURE_PYTHON=1`` forces the numpy fallback.
"""

import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

if _compiled is not None and not os.environ.get("PCSYNTH_PURE_PYTHON"):
    kernels = _compiled
    NAME = "cython"
else:
    kernels = _kernels_py
    NAME = "python"


def available() -> dict:
    """All importable kernel implementations, by name."""
    out = {"python": _kernels_py}
    if _compiled is not None:
        out["cython"] = _compiled
    return out
