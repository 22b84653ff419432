"""Pick the compiled kernels when available, the numpy fallback otherwise.

Set ``PTREE_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

if os.environ.get("PTREE_PURE_PYTHON", "") not in ("", "0"):
    kernels = _kernels_py
else:
    try:
        from . import _kernels as kernels
    except ImportError:  # extension not built
        kernels = _kernels_py

BACKEND = kernels.BACKEND
