import math

import numpy as np
import pytest
from scipy.linalg import expm

from hybridlgt import gates as G
from hybridlgt import hilbert as h


def _dense(circuit, lay):
    return G.exact_unitary(circuit, lay)


def test_beamsplitter_matches_generator(rng):
    lay = h.new_layout([2, 3], 0)
    a, b = h.mode_ops(lay, 0)[0], h.mode_ops(lay, 1)[0]
    for _ in range(5):
        phi, theta = rng.uniform(-np.pi, np.pi, 2)
        hop = np.exp(1j * phi) * a.conj().T @ b
        U = _dense(G.Circuit([G.beamsplitter(0, 1, phi, theta)]), lay)
        assert np.abs(U - expm(-1j * theta * (hop + hop.conj().T))).max() < 1e-12


def test_full_swap_beamsplitter_moves_single_photon():
    lay = h.new_layout([1, 1], 0)
    psi = h.basis_state(lay, [1, 0])
    G.Circuit([G.beamsplitter(0, 1, 0.0, math.pi / 2)]).apply(psi)
    assert psi.mode_populations(1)[1] == pytest.approx(1.0)


def test_conditional_parity_is_z_times_parity_up_to_phase():
    lay = h.new_layout([3], 1)
    n = h.mode_ops(lay, 0)[1]
    Z = h.qubit_op(lay, 0, "Z")
    U = _dense(G.Circuit([G.cond_parity(0, 0)]), lay)
    target = expm(-0.5j * math.pi * n @ Z)
    assert np.abs(U - target).max() < 1e-12
    # squared: pure phase on odd photon number (no qubit dependence)
    assert np.allclose(U @ U, np.diag(np.diag(U @ U)))


def test_conditional_displacement_pushes_opposite_ways():
    lay = h.new_layout([12], 1)
    a = h.mode_ops(lay, 0)[0]
    x = (a + a.conj().T) / 2
    alpha = 0.8
    for bit, sign in ((0, 1), (1, -1)):
        psi = h.basis_state(lay, [0], [bit])
        G.Circuit([G.cond_displacement(0, 0, alpha)]).apply(psi)
        assert h.expectation(psi, x).real == pytest.approx(sign * alpha, abs=1e-6)


def test_snap_phase_per_level():
    lay = h.new_layout([2], 0)
    th = [0.1, -0.4, 1.3]
    U = _dense(G.Circuit([G.snap(None, 0, th)]), lay)
    assert np.allclose(U, np.diag(np.exp(-1j * np.array(th))))


def test_snap_length_validated():
    lay = h.new_layout([2], 0)
    with pytest.raises(h.LayoutError):
        G.Circuit([G.snap(None, 0, [0.1, 0.2])], lay)


@pytest.mark.parametrize("make", [
    lambda: G.beamsplitter(0, 1, 0.3, 0.7),
    lambda: G.cond_rotation(0, 0, 0.9),
    lambda: G.cond_parity(0, 0),
    lambda: G.cond_displacement(0, 1, 0.2 - 0.1j),
    lambda: G.sqr(0, 0, [0.1, 0.2, 0.3], [0.0, 1.0, 2.0]),
    lambda: G.qubit_rphi(0, 0.4, 1.1),
])
def test_adjoint_inverts(make):
    lay = h.new_layout([2, 2], 1)
    c = G.Circuit([make()])
    U = _dense(c, lay)
    Ui = _dense(c.inverse(), lay)
    assert np.abs(Ui @ U - np.eye(lay.dim)).max() < 1e-12


def test_durations_in_seconds_and_asap_schedule():
    c = G.Circuit([G.cond_parity(0, 0), G.beamsplitter(1, 2, 0, 0.1), G.qubit_rz(0, 0.2)])
    assert c.ops[0].duration == pytest.approx(1e-6)
    assert c.ops[1].duration == pytest.approx(0.25e-6)
    assert c.ops[2].duration == pytest.approx(1e-8)
    assert c.schedule() == [(0.0, pytest.approx(1e-6)), (0.0, pytest.approx(0.25e-6)),
                            (pytest.approx(1e-6), pytest.approx(1.01e-6))]
    assert c.depth_time == pytest.approx(1.01e-6)
    assert c.duration == pytest.approx(1.26e-6)


def test_duration_profile_context():
    with G.duration_profile(G.ZERO_DURATIONS):
        op = G.cond_parity(0, 0)
    assert op.duration == 0.0


def test_non_finite_parameters_rejected():
    with pytest.raises(ValueError):
        G.beamsplitter(0, 1, float("nan"), 0.1)


def test_oracle_cap():
    lay = h.new_layout([15, 15, 15], 2)
    with pytest.raises(h.LayoutError):
        G.exact_unitary(G.Circuit([G.qubit_rz(0, 0.1)]), lay)
