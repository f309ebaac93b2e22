import os
import subprocess
import sys

import numpy as np
import pytest

from hybridlgt import kernels


def _case(rng):
    dims = (3, 4, 2, 2)
    axes = (1, 3)
    D = 8
    mat = rng.normal(size=(D, D)) + 1j * rng.normal(size=(D, D))
    vec = rng.normal(size=int(np.prod(dims))) + 1j * rng.normal(size=int(np.prod(dims)))
    return dims, axes, mat, vec


def _oracle(dims, axes, mat, vec):
    t = vec.reshape(dims)
    rest = [a for a in range(len(dims)) if a not in axes]
    perm = list(axes) + rest
    tp = np.transpose(t, perm).reshape(mat.shape[0], -1)
    out = (mat @ tp).reshape([dims[a] for a in perm])
    return np.transpose(out, np.argsort(perm)).reshape(-1)


@pytest.mark.parametrize("backend", kernels.available_backends())
def test_backend_matches_tensordot_oracle(backend, rng):
    dims, axes, mat, vec = _case(rng)
    prev = kernels.BACKEND
    kernels.use_backend(backend)
    try:
        got = kernels.apply_local(vec.copy(), dims, mat, axes)
        diag = np.diag(np.diag(mat))
        got_d = kernels.apply_local(vec.copy(), dims, diag, axes)
        batch = kernels.apply_local(np.stack([vec, 2 * vec], axis=1), dims, mat, axes)
    finally:
        kernels.use_backend(prev)
    assert np.allclose(got, _oracle(dims, axes, mat, vec), atol=1e-12)
    assert np.allclose(got_d, _oracle(dims, axes, diag, vec), atol=1e-12)
    assert np.allclose(batch[:, 1], 2 * got, atol=1e-12)


def test_repeated_axes_rejected():
    with pytest.raises(ValueError):
        kernels.apply_local(np.zeros(4, complex), (2, 2), np.eye(4), (0, 0))


def test_environment_forces_fallback():
    env = dict(os.environ, HYBRIDLGT_KERNEL="python")
    out = subprocess.run([sys.executable, "-c", "import hybridlgt; print(hybridlgt.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.use_backend("fortran")
