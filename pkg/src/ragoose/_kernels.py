"""Select the compiled kernels when available.

Set ``RAGOOSE_PURE_PYTHON=1`` to force the numpy/pure-Python fallback.
"""

import os

from . import _fallback

HAVE_EXTENSION = False

if os.environ.get("RAGOOSE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _core as _impl

        HAVE_EXTENSION = True
    except ImportError:  # extension not built
        _impl = _fallback
else:
    _impl = _fallback

rbf_cross = _impl.rbf_cross
rbf_gram = _impl.rbf_gram
simulate_loop = _impl.simulate_loop

__all__ = ["HAVE_EXTENSION", "rbf_cross", "rbf_gram", "simulate_loop"]
