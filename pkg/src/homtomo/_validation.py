"""Input validation helpers shared by the public modules."""

import numpy as np


class GridMismatchError(ValueError):
    """Two objects that must share a time grid do not."""


class LeakageError(ValueError):
    """A pulse or shifted state does not fit inside the grid window."""


def check_same_grid(*objs):
    grid = objs[0].grid
    for other in objs[1:]:
        if other.grid != grid:
            raise GridMismatchError(f"grid mismatch: {grid} vs {other.grid}")
    return grid


def check_vector(values, n, name="amp"):
    arr = np.asarray(values, dtype=complex)
    if arr.shape != (n,):
        raise ValueError(f"{name} must have shape ({n},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_square(values, n, name="kernel"):
    arr = np.asarray(values, dtype=complex)
    if arr.shape != (n, n):
        raise ValueError(f"{name} must have shape ({n}, {n}), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_hermitian(mat, rtol=1e-12, name="kernel"):
    scale = max(float(np.max(np.abs(mat))), np.finfo(float).tiny)
    dev = float(np.max(np.abs(mat - mat.conj().T))) if mat.size else 0.0
    if dev > rtol * scale:
        raise ValueError(f"{name} is not Hermitian (max deviation {dev:.3e}, scale {scale:.3e})")


def frozen(arr):
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr
