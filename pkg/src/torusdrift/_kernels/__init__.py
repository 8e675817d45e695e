"""Kernel backend selection.

The compiled Cython core is preferred when its extension module imports;
otherwise the pure NumPy implementation is used.  Set the environment
variable ``TORUSDRIFT_KERNELS`` to ``python`` or ``cython`` to force a
backend (forcing ``cython`` raises if the extension is missing).
"""

import os

from . import packing, purepy  # noqa: F401

_choice = os.environ.get("TORUSDRIFT_KERNELS", "auto").lower()

if _choice not in ("auto", "cython", "python"):
    raise ValueError(
        f"TORUSDRIFT_KERNELS must be auto, cython or python, got {_choice!r}")

_impl = None
if _choice in ("auto", "cython"):
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        if _choice == "cython":
            raise
if _impl is None:
    _impl = purepy

BACKEND = _impl.NAME
rk45_integrate = _impl.rk45_integrate
field_velocities = _impl.field_velocities


def available_backends():
    """Mapping of backend name to module, for benchmarks and tests."""
    out = {"python": purepy}
    try:
        from . import _core
        out["cython"] = _core
    except ImportError:
        pass
    return out
