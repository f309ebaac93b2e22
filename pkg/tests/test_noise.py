import math

import numpy as np
import pytest

from hybridlgt import gates as G
from hybridlgt import hilbert as h
from hybridlgt import noise as NZ


def test_noise_model_validation():
    with pytest.raises(NZ.NoiseError):
        NZ.NoiseModel(T1=1e-4, T2=3e-4)
    with pytest.raises(NZ.NoiseError):
        NZ.NoiseModel(T1=-1.0)
    assert math.isinf(NZ.NoiseModel(T1=1e-4, T2=2e-4).tphi(0))
    assert NZ.NoiseModel(T1=2e-4, T2=2e-4).tphi(0) == pytest.approx(4e-4)


def test_idle_decay_fraction_matches_exponential():
    """|1> idling for T: jump probability 1 - exp(-T/T1) (oracle: closed form)."""
    lay = h.new_layout([], 1)
    psi = h.basis_state(lay, [], [1])
    model = NZ.NoiseModel(T1=1e-4, T2=2e-4)
    T = 5e-5
    res = NZ.run_trajectories(G.Circuit([]), psi, model, 3000, seed=2, total_time=T)
    f, se = NZ.error_free_fraction(res)
    assert abs(f - math.exp(-T / 1e-4)) < 4 * se


def test_dephasing_flip_probability():
    """Pure dephasing over T flips the phase with probability (1 - exp(-T/T_phi)) / 2."""
    lay = h.new_layout([], 1)
    psi = h.fock_product(lay, [], "+")
    model = NZ.NoiseModel(T1=1.0, T2=2e-5)
    T = 2e-5
    res = NZ.run_trajectories(G.Circuit([]), psi, model, 3000, seed=4, total_time=T)
    x = np.array([np.vdot(r.state.data, h.PAULI["X"] @ r.state.data).real for r in res])
    tphi = model.tphi(0)
    expected = math.exp(-T / tphi) * math.exp(-T / 2.0)
    assert abs(x.mean() - expected) < 4 * x.std(ddof=1) / math.sqrt(x.size)


def test_trajectories_independent_of_worker_count():
    lay = h.new_layout([1], 2)
    psi = h.fock_product(lay, [1], "1+")
    c = G.Circuit([G.cond_parity(0, 0), G.qubit_rx(1, 0.3), G.cond_parity(1, 0)])
    model = NZ.NoiseModel(T1=3e-6, T2=3e-6)
    a = NZ.run_trajectories(c, psi, model, 12, seed=11, workers=1)
    b = NZ.run_trajectories(c, psi, model, 12, seed=11, workers=3)
    assert NZ.jumps_to_json(a) == NZ.jumps_to_json(b)
    for x, y in zip(a, b):
        assert np.allclose(x.state.data, y.state.data)


def test_noiseless_is_unitary_evolution():
    lay = h.new_layout([1], 1)
    psi = h.fock_product(lay, [1], "+")
    c = G.Circuit([G.cond_parity(0, 0)])
    res = NZ.trajectory_run(c, psi, NZ.NOISELESS)
    ref = psi.copy()
    c.apply(ref)
    assert np.allclose(res.state.data, ref.data) and not res.jumps


def test_zero_duration_circuit_rejected_when_noisy():
    lay = h.new_layout([], 1)
    with G.duration_profile(G.ZERO_DURATIONS):
        c = G.Circuit([G.qubit_rz(0, 0.1)])
    with pytest.raises(NZ.NoiseError):
        NZ.trajectory_run(c, h.basis_state(lay, [], [0]), NZ.NoiseModel())


def test_closed_forms():
    assert NZ.analytic_mode_nsq(3, 9, 1.0, 0.0) == 9
    assert NZ.analytic_fock_binary_nsq(5, 1.0, 0.0) == 25
    # N = 2^k - 1 approaches (5/3) gamma
    assert NZ.fock_binary_short_time_rate(2 ** 10 - 1) == pytest.approx(5 / 3, rel=2e-3)
    assert NZ.oscillator_short_time_rate(4) == pytest.approx(1.75)
    assert NZ.binary_digits(6) == [0, 1, 1]
    with pytest.raises(NZ.NoiseError):
        NZ.binary_digits(8, 3)


def test_decay_time_scan_matches_definition():
    for row in NZ.effective_decay_time_scan([1, 3, 6]):
        f = lambda t: NZ.analytic_mode_nsq(row.N, row.N ** 2, 1.0, t)
        assert f(row.oscillator) == pytest.approx(row.N ** 2 / math.e, rel=1e-9)
        assert NZ.analytic_fock_binary_nsq(row.N, 1.0, row.fock_binary) == pytest.approx(
            row.N ** 2 / math.e, rel=1e-9)


def test_mode_decay_survival():
    """No-jump probability of Fock |N> under loss is exp(-kappa N t)."""
    N, kappa = 4, 1.0
    t = 0.5 / (kappa * N)
    psi = h.basis_state(h.new_layout([N], 0), [N])
    n = 4000
    surv = np.mean([not NZ.mode_decay_trajectory(psi, 0, kappa, t, 3, i).jumps for i in range(n)])
    assert abs(surv - math.exp(-0.5)) < 4 * math.sqrt(surv * (1 - surv) / n)
