"""Kernel backend selection.

The compiled Cython extension is preferred when importable; otherwise the
numpy fallback is used. Set EMGAUTH_KERNELS=python to force the fallback, or
EMGAUTH_KERNELS=compiled to require the extension (ImportError if missing).
Both backends expose the same functions with identical semantics.
"""

from __future__ import annotations

import os

_requested = os.environ.get("EMGAUTH_KERNELS", "").strip().lower()

if _requested in ("py", "python", "pure"):
    from emgauth._kernels import _pykernels as _impl

    _backend = "python"
elif _requested in ("c", "compiled", "ext"):
    from emgauth._kernels import _ckernels as _impl  # noqa: F401

    _backend = "compiled"
else:
    try:
        from emgauth._kernels import _ckernels as _impl

        _backend = "compiled"
    except ImportError:
        from emgauth._kernels import _pykernels as _impl

        _backend = "python"

td_block = _impl.td_block
burg_block = _impl.burg_block


def backend_name() -> str:
    """Name of the active kernel backend: 'compiled' or 'python'."""
    return _backend
