"""Thinning-kernel backend selection.

The compiled Cython kernel is preferred when it was built; otherwise the
pure-Python reference kernel is used. Set ``NETSTEER_PURE=1`` to force the
fallback (used by the parity tests and the benchmark). Both backends produce
bit-identical event streams.
"""

from __future__ import annotations

import os

if os.environ.get("NETSTEER_PURE"):
    from . import _thinning_py as _impl
else:
    try:
        from . import _thinning as _impl  # type: ignore[no-redef]
    except ImportError:
        from . import _thinning_py as _impl

run_chunk = _impl.run_chunk


def active_backend() -> str:
    return "compiled" if _impl.COMPILED else "pure"


def get_backend(name: str):
    """Explicit backend lookup (benchmark / parity tests)."""
    if name == "pure":
        from . import _thinning_py
        return _thinning_py
    if name == "compiled":
        from . import _thinning  # raises ImportError when not built
        return _thinning
    raise ValueError(f"unknown backend {name!r}")
