"""Local-gate application over strided tensor axes.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
numpy fallback in ``_kernels_py`` provides identical semantics.  Setting
``HYBRIDLGT_KERNEL=python`` forces the fallback.
"""

from __future__ import annotations

import os
from functools import lru_cache

import numpy as np

from . import _kernels_py

_impl = _kernels_py
BACKEND = "python"
if os.environ.get("HYBRIDLGT_KERNEL", "").lower() != "python":
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on build
        _impl = _kernels_py


def available_backends() -> list[str]:
    """Backends importable in this build, fallback first."""
    out = ["python"]
    try:
        from . import _ckernels  # noqa: F401

        out.append("cython")
    except ImportError:  # pragma: no cover - depends on build
        pass
    return out


def use_backend(name: str) -> None:
    """Switch the active backend ("cython" or "python") at runtime."""
    global _impl, BACKEND
    if name == "python":
        _impl, BACKEND = _kernels_py, "python"
    elif name == "cython":
        from . import _ckernels

        _impl, BACKEND = _ckernels, "cython"
    else:
        raise ValueError(f"unknown backend {name!r}")


@lru_cache(maxsize=4096)
def index_tables(dims: tuple[int, ...], axes: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
    """Base offsets over the untouched axes and local offsets over ``axes``."""
    strides = np.ones(len(dims), dtype=np.int64)
    for k in range(len(dims) - 2, -1, -1):
        strides[k] = strides[k + 1] * dims[k + 1]
    loc = np.zeros(1, dtype=np.int64)
    for a in axes:
        loc = (loc[:, None] + strides[a] * np.arange(dims[a], dtype=np.int64)[None, :]).ravel()
    base = np.zeros(1, dtype=np.int64)
    for a in range(len(dims)):
        if a in axes:
            continue
        base = (base[:, None] + strides[a] * np.arange(dims[a], dtype=np.int64)[None, :]).ravel()
    return base, loc


def apply_local(data: np.ndarray, dims, mat: np.ndarray, axes) -> np.ndarray:
    """Apply ``mat`` (ordered C-style over ``axes``) to a (dim,) or (dim, K) array.

    A new contiguous array is returned when a copy was needed; the caller should
    always use the return value.
    """
    axes = tuple(int(a) for a in axes)
    if len(set(axes)) != len(axes):
        raise ValueError(f"repeated axes {axes}")
    vec = data.ndim == 1
    arr = data.reshape(-1, 1) if vec else data
    arr = np.ascontiguousarray(arr, dtype=np.complex128)
    base, off = index_tables(tuple(int(d) for d in dims), axes)
    m = np.ascontiguousarray(mat, dtype=np.complex128)
    if m.shape != (off.size, off.size):
        raise ValueError(f"matrix shape {m.shape} does not match local dimension {off.size}")
    if np.count_nonzero(m - np.diag(np.diag(m))) == 0:
        diag = np.ones(arr.shape[0], dtype=np.complex128)
        d = np.diag(m)
        diag[(base[:, None] + off[None, :]).ravel()] = np.tile(d, base.size)
        _impl.apply_diagonal(arr, diag)
    else:
        _impl.apply_local_tables(arr, m, base, off)
    return arr[:, 0] if vec else arr


def apply_diagonal(data: np.ndarray, diag: np.ndarray) -> np.ndarray:
    vec = data.ndim == 1
    arr = np.ascontiguousarray(data.reshape(-1, 1) if vec else data, dtype=np.complex128)
    _impl.apply_diagonal(arr, np.ascontiguousarray(diag, dtype=np.complex128))
    return arr[:, 0] if vec else arr
