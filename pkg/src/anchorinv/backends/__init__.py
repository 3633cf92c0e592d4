"""Kernel backend selection: compiled extension when built, numpy fallback.

The active backend is chosen at import: the compiled extension if it is
importable, else the pure-python one. Set ANCHORINV_BACKEND=python or
ANCHORINV_BACKEND=compiled to force a choice (forcing an unavailable
backend raises). ``use_backend`` switches at runtime (benchmarks, tests).
"""

from __future__ import annotations

import os

from . import _kernels_py

try:
    from . import _kernels_cy
except ImportError:
    _kernels_cy = None

_BACKENDS = {"python": _kernels_py}
if _kernels_cy is not None:
    _BACKENDS["compiled"] = _kernels_cy


def available_backends() -> tuple:
    return tuple(sorted(_BACKENDS))


def get_backend(name: str):
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"backend {name!r} not available (have {available_backends()})"
        ) from None


def _initial():
    forced = os.environ.get("ANCHORINV_BACKEND")
    if forced:
        return get_backend(forced)
    return _BACKENDS.get("compiled", _kernels_py)


_active = _initial()


def use_backend(name: str) -> None:
    global _active
    _active = get_backend(name)


def backend_name() -> str:
    return _active.NAME


def tridiag_solve(dl, d, du, b):
    return _active.tridiag_solve(dl, d, du, b)


def tridiag_solve_batch(dl, d, du, b):
    return _active.tridiag_solve_batch(dl, d, du, b)


def knn_search(points, k, include_self=False):
    return _active.knn_search(points, k, include_self=include_self)


def neighborhood_moments(points, idx, weights):
    return _active.neighborhood_moments(points, idx, weights)
