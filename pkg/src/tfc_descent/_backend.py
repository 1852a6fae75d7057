"""Kernel backend selection: compiled extension if importable, else pure Python."""

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    BACKENDS["cython"] = _compiled

DEFAULT = "cython" if _compiled is not None else "python"
kernels = BACKENDS[DEFAULT]


def get_backend(name=None):
    """Kernel module by name (``"cython"`` or ``"python"``); ``None`` gives the default."""
    if name is None:
        return kernels
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}") from None
