"""Hot-kernel dispatch: the compiled extension when importable, numpy otherwise.

Set ``EBRANSAC_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

from . import _pykernels

LINREG, GAUSSIAN, EXPONENTIAL = _pykernels.LINREG, _pykernels.GAUSSIAN, _pykernels.EXPONENTIAL

_impl = _pykernels
if os.environ.get("EBRANSAC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]
    except ImportError:
        pass

BACKEND = "cython" if _impl is not _pykernels else "python"

ebr_value_grad_u = _impl.ebr_value_grad_u
descend = _impl.descend
descend_callable = _pykernels.descend_callable
softplus = _pykernels.softplus
sigmoid = _pykernels.sigmoid


def backends():
    """Available kernel modules keyed by name (used by tests and the benchmark)."""
    found = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        return found
    found["cython"] = _ckernels
    return found
