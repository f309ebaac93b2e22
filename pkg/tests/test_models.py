import numpy as np
import pytest

from hybridlgt import hilbert as h
from hybridlgt import models as M


def _comm(A, B):
    return np.abs(A @ B - B @ A).max()


def test_z2_hamiltonian_hermitian_and_gauge_invariant():
    p = M.Z2Params(L=3, g=0.7, U=0.3, J=1.1, N=2)
    lay, terms, H = M.build_z2_1d(p)
    assert np.allclose(H, H.conj().T)
    for g in M.gauss_ops_z2(lay, p):
        assert _comm(H, g.op) < 1e-12
    assert _comm(H, M.z2_total_number(lay, p)) < 1e-12


def test_z2_two_site_spectrum_by_hand():
    """L=2, N=1: |10,x> <-> |01,-x> hopping with -gX on the link."""
    p = M.Z2Params(L=2, g=0.4, U=0.0, J=1.0, N=1)
    lay, _, H = M.build_z2_1d(p)
    B = M.sector_basis(lay, M.gauss_ops_z2(lay, p), [1, -1], M.z2_total_number(lay, p), 1)
    Hs = B.conj().T @ H @ B
    w = np.linalg.eigvalsh(Hs)
    # oracle: 2x2 block [[-g, -J], [-J, g]] in the (|10,+>, |01,->) basis
    assert np.allclose(w, np.linalg.eigvalsh(np.array([[-0.4, -1.0], [-1.0, 0.4]])))


def test_unit_filling_link_labels_match_gauss_walk():
    from hybridlgt import vqe as V
    links, targets = V.z2_unit_filling_links(M.Z2Params(L=5, N=1), [0, 0, 1, 0, 0])
    assert links == "++--"
    assert targets == [1, 1, 1, 1, -1]
    links2, _ = V.z2_unit_filling_links(M.Z2Params(L=5, N=2), [0, 0, 2, 0, 0])
    assert links2 == "++++"


def test_z2_params_validation():
    with pytest.raises(ValueError):
        M.Z2Params(L=1)
    with pytest.raises(ValueError):
        M.Z2Params(L=3, N=3, cutoff=2)
    with pytest.raises(ValueError):
        M.Z2Params(L=3, g=float("inf"))


def test_u1_hamiltonian_gauge_invariant():
    p = M.U1Params(L=2, g=1.0, J=0.8, M=0.3, S=1.0, tau=0.4)
    lay, _, H = M.build_u1_1d(p)
    assert np.allclose(H, H.conj().T)
    for g in M.gauss_ops_u1(lay, p):
        assert _comm(H, g.op) < 1e-12
    B = M.u1_physical_basis(lay, p)
    assert B.shape[1] > 0
    assert np.allclose(B.conj().T @ B, np.eye(B.shape[1]))


def test_u1_spin_validation():
    with pytest.raises(ValueError):
        M.U1Params(L=2, S=0.3)


def test_jordan_wigner_anticommutation():
    n = 3
    cs = [M.jw_annihilation(n, i) for i in range(n)]
    for i in range(n):
        for j in range(n):
            anti = cs[i] @ cs[j].conj().T + cs[j].conj().T @ cs[i]
            assert np.allclose(anti, np.eye(2 ** n) * (i == j))


def test_pauli_decompose_roundtrip(rng):
    A = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    A = A + A.conj().T
    dec = M.pauli_decompose(A, 2)
    P = h.PAULI
    rebuilt = sum(c * np.kron(P[s[0]], P[s[1]]) for s, c in dec.items())
    assert np.allclose(rebuilt, A)


def test_iswap_matrix_unitary():
    U = M.iswap_matrix(0.37)
    assert np.allclose(U.conj().T @ U, np.eye(4))
