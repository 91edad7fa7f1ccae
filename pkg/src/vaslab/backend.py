"""Selects the episode-step kernel implementation at import time.

The compiled extension (`vaslab._kernels`) is preferred when importable;
otherwise the NumPy reference (`vaslab._pyops`) is used. Override with the
environment variable VASLAB_BACKEND in {auto, python, native}.

Both backends agree to floating-point roundoff, but not bit-for-bit, so
seeded runs are reproducible per backend (a sampled trajectory may differ
across backends in rare near-tie cases).
"""

from __future__ import annotations

import os

from . import _pyops

_choice = os.environ.get("VASLAB_BACKEND", "auto").lower()
if _choice not in ("auto", "python", "native"):
    raise RuntimeError(f"VASLAB_BACKEND must be auto, python or native, not {_choice!r}")

_impl = _pyops
_name = "python"
if _choice != "python":
    try:
        from . import _kernels as _native
    except ImportError:
        if _choice == "native":
            raise
    else:
        _impl = _native
        _name = "native"

predictor_forward = _impl.predictor_forward
predictor_backward = _impl.predictor_backward
searcher_forward = _impl.searcher_forward
searcher_backward = _impl.searcher_backward
adam_update = _impl.adam_update


def backend_name() -> str:
    return _name


def available_backends() -> list[str]:
    names = ["python"]
    try:
        from . import _kernels  # noqa: F401
    except ImportError:
        pass
    else:
        names.append("native")
    return names


def get_impl(name: str):
    """Fetch a specific implementation module (for tests and benchmarks)."""
    if name == "python":
        return _pyops
    if name == "native":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {name!r}")
