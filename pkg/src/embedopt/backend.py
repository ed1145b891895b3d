"""Kernel backend selection.

The compiled extension ``embedopt._core`` is preferred when it imported
cleanly; otherwise the NumPy implementations in ``_kernels_py`` are used.
Setting the environment variable ``EMBEDOPT_NO_EXT=1`` before import forces
the NumPy backend. ``set_backend``/``get_backend`` exist so tests and the
kernel benchmark can pin either implementation explicitly.
"""

import os

from . import _kernels_py

try:
    from . import _core
except ImportError:  # extension not built on this install
    _core = None

HAVE_EXT = _core is not None

_BACKENDS = {"numpy": _kernels_py}
if HAVE_EXT:
    _BACKENDS["compiled"] = _core

if os.environ.get("EMBEDOPT_NO_EXT", "").strip() not in ("", "0"):
    active = _kernels_py
else:
    active = _core if HAVE_EXT else _kernels_py


def available_backends():
    return sorted(_BACKENDS)


def get_backend(name=None):
    """Return a kernel module: the active one, or the named one."""
    if name is None:
        return active
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"unknown backend {name!r}; available: {available_backends()}"
        ) from None


def set_backend(name):
    """Switch the active backend; returns the previously active name."""
    global active
    previous = active.name
    active = get_backend(name)
    return previous
