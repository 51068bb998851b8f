"""Backend selection for the hot inner loops.

The compiled extension is used when it was built; ``SPINFRIDGE_BACKEND=python``
forces the NumPy fallback.
"""
import os

from spinfridge import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("SPINFRIDGE_BACKEND", "").lower() != "python":
    try:
        from spinfridge import _ckernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        pass

closed_form_denominator = _impl.closed_form_denominator
resolvent_row = _impl.resolvent_row
resolvent_rows_stack = _impl.resolvent_rows_stack


def available_backends():
    out = {"python": _pykernels}
    try:
        from spinfridge import _ckernels
        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
