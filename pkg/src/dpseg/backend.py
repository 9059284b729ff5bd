"""Backend selection: compiled extension when built, pure Python otherwise."""

from __future__ import annotations

from . import _pykernels

try:
    from . import _kernels
except ImportError:  # extension not built
    _kernels = None

HAVE_COMPILED = _kernels is not None

__all__ = ["HAVE_COMPILED", "get_backend", "backend_name"]


def get_backend(name: str = "auto"):
    """Return the kernel module for ``name`` in {auto, compiled, python}."""
    if name == "auto":
        return _kernels if HAVE_COMPILED else _pykernels
    if name == "compiled":
        if not HAVE_COMPILED:
            raise RuntimeError(
                "compiled backend requested but dpseg._kernels is not built"
            )
        return _kernels
    if name == "python":
        return _pykernels
    raise ValueError(f"unknown backend {name!r}")


def backend_name(name: str = "auto") -> str:
    return get_backend(name).BACKEND_NAME
