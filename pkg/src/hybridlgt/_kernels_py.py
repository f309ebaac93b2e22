"""Pure-numpy kernels; the reference semantics for the compiled core."""

import numpy as np


def apply_local_tables(data, mat, base, off):
    """In place: for every base index b, amplitudes at b + off are mapped by mat.

    ``data`` has shape (dim, K); ``mat`` is (D, D) with D = len(off).
    """
    idx = base[:, None] + off[None, :]
    block = data[idx]
    data[idx] = np.einsum("ij,bjk->bik", mat, block)
    return data


def apply_diagonal(data, diag):
    """In place elementwise multiply of a (dim, K) array by a length-dim vector."""
    data *= diag[:, None]
    return data
