"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The backend is chosen at import time: numba when it imports cleanly and the
environment variable ``OPFTRACK_NO_NUMBA`` is unset (or ``0``), numpy
otherwise. :func:`set_backend` switches at runtime, which the benchmark and
the cross-check tests rely on.
"""
import os

import numpy as np

from . import _numpy

try:
    from . import _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

__all__ = [
    "available_backends", "backend", "set_backend", "use_backend",
    "wrap", "propagate", "weight_update", "systematic_indices", "weighted_mean_cov",
    "max_pairwise",
]

_IMPLS = {"numpy": _numpy}
if _numba is not None:
    _IMPLS["numba"] = _numba


def _default_backend():
    flag = os.environ.get("OPFTRACK_NO_NUMBA", "").strip().lower()
    if flag not in ("", "0", "false", "no") or "numba" not in _IMPLS:
        return "numpy"
    return "numba"


_active = _IMPLS[_default_backend()]


def available_backends():
    return tuple(_IMPLS)


def backend():
    """Name of the active backend."""
    return "numba" if _active is _numba else "numpy"


def set_backend(name):
    global _active
    try:
        _active = _IMPLS[name]
    except KeyError:
        raise ValueError(f"unknown kernel backend {name!r}; "
                         f"available: {', '.join(_IMPLS)}") from None


class use_backend:
    """Context manager that temporarily switches the kernel backend."""

    def __init__(self, name):
        self.name = name

    def __enter__(self):
        self._prev = backend()
        set_backend(self.name)
        return self

    def __exit__(self, *exc):
        set_backend(self._prev)


def wrap(a):
    """Wrap angles into (-pi, pi]; scalars and arrays alike."""
    out = _numpy.wrap(np.asarray(a, dtype=float))
    return float(out) if out.ndim == 0 else out


def propagate(particles, delta, factor, z, angular):
    return _active.propagate(particles, delta, factor, z, angular)


def weight_update(particles, weights, y, q_inv, log_norm, angular):
    return _active.weight_update(particles, weights, y, q_inv, log_norm, angular)


def systematic_indices(weights, u):
    return _active.systematic_indices(weights, u)


def weighted_mean_cov(particles, weights, angular):
    return _active.weighted_mean_cov(particles, weights, angular)


def max_pairwise(points, angular):
    return float(_active.max_pairwise(points, angular))
