"""Hot inner loops behind a backend switch.

Two interchangeable implementations exist for every kernel: a numba-compiled
one (``_numba``) and a pure-numpy one (``_numpy``).  numba is used when it is
importable unless the environment variable ``OMRKIT_DISABLE_NUMBA`` is set to
a truthy value.  Both backends must return bit-identical results; the test
suite checks this directly.
"""
import logging
import os

from . import _numpy

log = logging.getLogger(__name__)

_FALSY = ("", "0", "false", "no", "off")


def _numba_requested():
    return os.environ.get("OMRKIT_DISABLE_NUMBA", "").strip().lower() in _FALSY


def _load_numba():
    try:
        from . import _numba
    except ImportError as exc:  # pragma: no cover - depends on environment
        log.info("numba unavailable (%s); using numpy kernels", exc)
        return None
    return _numba


_numba_mod = _load_numba() if _numba_requested() else None

BACKEND = "numba" if _numba_mod is not None else "numpy"
_impl = _numba_mod if _numba_mod is not None else _numpy

erode_rows = _impl.erode_rows
dilate_rows = _impl.dilate_rows
label8 = _impl.label8
nms_sorted = _impl.nms_sorted


def backends():
    """Return ``{name: module}`` for every backend usable in this process."""
    out = {"numpy": _numpy}
    mod = _numba_mod if _numba_mod is not None else _load_numba()
    if mod is not None:
        out["numba"] = mod
    return out


__all__ = ["BACKEND", "backends", "erode_rows", "dilate_rows", "label8", "nms_sorted"]
