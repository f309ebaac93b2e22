import numpy as np
import pytest

from hybridlgt import hilbert as h
from hybridlgt import measurement as MS
from hybridlgt import models as M
from hybridlgt import vqe as V


def _hop_dense(lay, i, j, phi=0.0):
    a, b = h.mode_ops(lay, i)[0], h.mode_ops(lay, j)[0]
    O = np.exp(1j * phi) * a.conj().T @ b
    return O + O.conj().T


def _random_state(lay, rng, cap=None):
    """Random state; with ``cap``, only modes 0, 1 totals n_0 + n_1 <= cap are populated
    (the beamsplitter basis change is exact only where both photons fit)."""
    v = rng.normal(size=lay.dim) + 1j * rng.normal(size=lay.dim)
    if cap is not None:
        tab = lay.occupation_table()
        v[tab[:, 0] + tab[:, 1] > cap] = 0.0
    return h.StateVector(lay, v).normalize()


@pytest.mark.parametrize("phi", [0.0, 0.7])
def test_hopping_via_beamsplitter_exact(rng, phi):
    lay = h.new_layout([3, 3], 1)
    psi = _random_state(lay, rng, cap=3)
    est, se = MS.hopping_expectation_bs(psi, 0, 1, None, phi=phi)
    assert se == 0.0
    assert est == pytest.approx(h.expectation(psi, _hop_dense(lay, 0, 1, phi)).real, abs=1e-12)


def test_hopping_sampled_standard_error(rng):
    lay = h.new_layout([2, 2], 0)
    psi = _random_state(lay, rng, cap=2)
    est, se = MS.hopping_expectation_bs(psi, 0, 1, 4000, rng)
    exact = h.expectation(psi, _hop_dense(lay, 0, 1)).real
    assert abs(est - exact) < 5 * se


def test_string_order_converges_as_theta_squared(rng):
    lay = h.new_layout([1, 1], 1)
    psi = _random_state(lay, rng)
    exact = h.expectation(psi, MS.string_operator(lay, 0, 1, [0])).real
    ths = np.array([0.05, 0.1, 0.2])
    bias = [abs(MS.string_order(psi, 0, 1, t, [0])[0] - exact) for t in ths]
    assert np.polyfit(np.log(ths), np.log(bias), 1)[0] == pytest.approx(2.0, abs=0.3)


def test_string_order_rejects_zero_theta():
    lay = h.new_layout([1, 1], 1)
    with pytest.raises(ValueError):
        MS.string_order(h.basis_state(lay, [0, 0], [0]), 0, 1, 0.0, [0])


def test_grouped_energy_exact_matches_dense():
    spec = V.AnsatzSpec("z2", 1, M.Z2Params(L=3))
    rng = np.random.default_rng(3)
    psi = V.prepare(spec, rng.normal(scale=0.3, size=spec.n_angles))
    est = MS.z2_energy(psi, spec.params, None, gauss_targets=spec.gauss_targets)
    assert est.mean == pytest.approx(spec.energy(psi), abs=1e-10)


def test_u1_grouped_energy_exact_matches_dense():
    spec = V.AnsatzSpec("u1", 1, M.U1Params(L=2, S=1.0, M=0.3, tau=0.5))
    rng = np.random.default_rng(4)
    psi = V.prepare(spec, rng.normal(scale=0.3, size=spec.n_angles))
    assert MS.u1_energy(psi, spec.params, None).mean == pytest.approx(spec.energy(psi), abs=1e-10)


def test_sampling_is_seed_deterministic():
    lay = h.new_layout([2], 1)
    psi = h.StateVector(lay, np.ones(lay.dim)).normalize()
    a = MS.sample_basis(psi, 50, np.random.default_rng(9)).outcomes
    b = MS.sample_basis(psi, 50, np.random.default_rng(9)).outcomes
    assert np.array_equal(a, b)


def test_binary_fock_readout_reads_photon_number(rng):
    lay = h.new_layout([5], 1)
    for n in range(6):
        value, post = MS.binary_fock_readout(h.basis_state(lay, [n], [0]), 0, 0, rng)
        assert value == n
        assert post.mode_populations(0)[n] == pytest.approx(1.0)
    sup = h.StateVector(lay, (h.basis_state(lay, [2], [0]).data + h.basis_state(lay, [5], [0]).data))
    value, post = MS.binary_fock_readout(sup.normalize(), 0, 0, rng)
    assert value in (2, 5)
    assert post.mode_populations(0)[value] == pytest.approx(1.0)


def test_observable_suite_product_state():
    p = M.Z2Params(L=3, N=3)
    lay = M.z2_layout(p)
    psi = h.fock_product(lay, [1, 1, 1], "-+")
    obs = MS.observable_suite(psi, 3)
    assert obs.parity == pytest.approx(-1.0)
    assert obs.clump == pytest.approx(0.0)
    assert obs.fluctuations == pytest.approx(0.0)


def test_stiffness_free_bosons_positive():
    """Even boson number on a ring: the twisted ground energy rises with the twist."""
    rho = MS.stiffness(M.Z2Params(L=2, g=0.0, U=0.0, J=1.0, N=2))
    assert rho > 0
