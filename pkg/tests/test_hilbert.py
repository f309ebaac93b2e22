import numpy as np
import pytest

from hybridlgt import hilbert as h


def test_index_convention_last_qubit_fastest():
    lay = h.new_layout([2], 1)
    assert lay.dims == (3, 2)
    assert lay.index([2], [1]) == 5
    assert lay.labels(5) == (2, 1)


def test_labels_roundtrip_mixed_layout():
    lay = h.new_layout([1, 3], 2)
    for idx in range(lay.dim):
        lab = lay.labels(idx)
        assert lay.index(lab[:2], lab[2:]) == idx
    assert np.array_equal(lay.occupation_table()[7], lay.labels(7))


@pytest.mark.parametrize("bad", [([-1], 0), ([0], 3)])
def test_layout_rejects_invalid(bad):
    with pytest.raises(h.LayoutError):
        h.new_layout(*bad)


def test_index_rejects_out_of_range_occupation():
    lay = h.new_layout([2], 1)
    with pytest.raises(h.LayoutError):
        lay.index([3], [0])
    with pytest.raises(h.LayoutError):
        lay.index([0], [2])


def test_ladder_operators_truncated_commutator():
    a = h.annihilation(4)
    comm = a @ a.conj().T - a.conj().T @ a
    expected = np.eye(5)
    expected[4, 4] = -4  # truncation artefact on the top level
    assert np.allclose(comm, expected)
    assert np.allclose(a.conj().T @ a, h.number(4))


def test_qubit_zero_has_z_plus_one():
    lay = h.new_layout([], 1)
    psi = h.basis_state(lay, [], [0])
    assert h.expectation(psi, h.qubit_op(lay, 0, "Z")).real == pytest.approx(1.0)


def test_expm_hermitian_matches_scipy(rng):
    from scipy.linalg import expm
    A = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    G = A + A.conj().T
    assert np.allclose(h.expm_hermitian(G), expm(-1j * G), atol=1e-12)


def test_fock_product_plus_minus_labels():
    lay = h.new_layout([1], 2)
    psi = h.fock_product(lay, [1], "+-")
    X0 = h.qubit_op(lay, 0, "X")
    X1 = h.qubit_op(lay, 1, "X")
    assert h.expectation(psi, X0).real == pytest.approx(1.0)
    assert h.expectation(psi, X1).real == pytest.approx(-1.0)
    assert psi.mode_populations(0)[1] == pytest.approx(1.0)


def test_apply_local_matches_dense_embedding(rng):
    lay = h.new_layout([2, 1], 1)
    M = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    axes = [0, 2]
    psi = h.StateVector(lay, rng.normal(size=lay.dim) + 0j).normalize()
    dense = h.embed_local(lay, M, axes) @ psi.data
    assert np.allclose(psi.copy().apply_local(M, axes).data, dense)


def test_top_level_weight_flags_truncation():
    lay = h.new_layout([3], 0)
    psi = h.product_state(lay, [np.array([1, 0, 0, 1.0])])
    assert psi.top_level_weight(0) == pytest.approx(0.5)
