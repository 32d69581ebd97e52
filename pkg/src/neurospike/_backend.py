"""Import-time selection between the compiled kernel and the pure-Python engine.

Set ``NEUROSPIKE_PURE_PYTHON=1`` to force the fallback.
"""
import os

try:
    from ._ckernel import run_closed_loop as _compiled
except ImportError:  # extension not built
    _compiled = None

HAVE_COMPILED = _compiled is not None
FORCE_PYTHON = os.environ.get("NEUROSPIKE_PURE_PYTHON", "") not in ("", "0")
DEFAULT_BACKEND = "compiled" if HAVE_COMPILED and not FORCE_PYTHON else "python"


def compiled_kernel():
    if _compiled is None:
        raise ImportError("neurospike._ckernel is not built; reinstall the package with a C compiler")
    return _compiled


def available_backends():
    return ("compiled", "python") if HAVE_COMPILED else ("python",)
