"""Kernel backend selection.

Imports the compiled extension (`shelltriage._native`, Cython) when it is
available and falls back to the NumPy implementations otherwise. Set
`SHELLTRIAGE_PURE_PYTHON=1` to force the fallback, e.g. for benchmarking
one backend against the other.
"""

from __future__ import annotations

import os

from shelltriage.kernels import _numpy

_native = None
if os.environ.get("SHELLTRIAGE_PURE_PYTHON", "0") in ("", "0"):
    try:
        from shelltriage import _native  # type: ignore[no-redef]
    except ImportError:
        _native = None

if _native is not None:
    BACKEND = "native"
    resize_bilinear_u8 = _native.resize_bilinear_u8
    grid_features_u8 = _native.grid_features_u8
    cosine_scores = _native.cosine_scores
else:
    BACKEND = "numpy"
    resize_bilinear_u8 = _numpy.resize_bilinear_u8
    grid_features_u8 = _numpy.grid_features_u8
    cosine_scores = _numpy.cosine_scores


def backend_name() -> str:
    return BACKEND
