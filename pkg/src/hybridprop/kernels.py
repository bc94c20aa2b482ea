"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
fallback. Set ``HYBRIDPROP_PURE_PYTHON=1`` to force the fallback.
"""

import importlib
import os

__all__ = ["BACKEND", "load_backend", "meanfield_derivative", "unitary_derivative",
           "operator_derivative", "conjugated_expectations"]

_MODULES = {"cython": "hybridprop._ckernels", "python": "hybridprop._pykernels"}


def load_backend(name):
    """Import and return the kernel module for ``name`` ("cython" or "python")."""
    return importlib.import_module(_MODULES[name])


def _select():
    if os.environ.get("HYBRIDPROP_PURE_PYTHON", "") not in ("", "0"):
        return "python", load_backend("python")
    try:
        return "cython", load_backend("cython")
    except ImportError:
        return "python", load_backend("python")


BACKEND, _impl = _select()

meanfield_derivative = _impl.meanfield_derivative
unitary_derivative = _impl.unitary_derivative
operator_derivative = _impl.operator_derivative
conjugated_expectations = _impl.conjugated_expectations
