"""Kernel backend selection.

The hot tensor kernels exist twice: a compiled Cython extension (``_fast``)
and a numpy reference (``numpy_backend``). The compiled core is preferred
when built; set ``SOFTLABELS_BACKEND=numpy`` or ``=cython`` to force one.
"""

import os

from . import numpy_backend

try:
    from . import _fast
except ImportError:
    _fast = None

_BACKENDS = {"numpy": numpy_backend}
if _fast is not None:
    _BACKENDS["cython"] = _fast


def _select(name):
    if name not in _BACKENDS:
        if name == "cython":
            raise ImportError(
                "the compiled kernel backend was requested but the extension "
                "is not built (pip install -e . --no-build-isolation)"
            )
        raise ValueError(f"unknown kernel backend {name!r}; known: {available_backends()}")
    return _BACKENDS[name]


def available_backends():
    return sorted(_BACKENDS)


def backend_name():
    for name, mod in _BACKENDS.items():
        if mod is active:
            return name
    raise RuntimeError("active backend is not registered")


def use_backend(name):
    """Switch the active kernel backend (mainly for tests and benchmarks)."""
    global active
    active = _select(name)
    return active


_env = os.environ.get("SOFTLABELS_BACKEND", "").strip().lower()
active = _select(_env) if _env else _BACKENDS.get("cython", numpy_backend)
