"""Backend selection for the sampling kernels.

The compiled extension is preferred when importable; the numpy fallback is
bit-compatible. Set ``PRIVDIST_BACKEND=python`` or ``=compiled`` to force a
choice (forcing ``compiled`` raises if the extension is missing).
"""

from __future__ import annotations

import os

from . import _kernels_py

_FORCE = os.environ.get("PRIVDIST_BACKEND", "").strip().lower()

if _FORCE == "python":
    _impl = _kernels_py
    BACKEND = "python"
elif _FORCE == "compiled":
    from . import _kernels as _impl  # type: ignore[no-redef]

    BACKEND = "compiled"
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

alias_pick = _impl.alias_pick
flattened_pick = _impl.flattened_pick


def backends_available() -> dict[str, bool]:
    """Report which kernel implementations can be imported."""
    compiled = True
    try:
        from . import _kernels  # noqa: F401
    except ImportError:
        compiled = False
    return {"compiled": compiled, "python": True}
