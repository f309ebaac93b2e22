import math

import numpy as np
import numpy.polynomial.chebyshev as cheb
import pytest

from hybridlgt import qsp as Q


def test_single_phase_is_signal():
    """phi = (0, 0): <0|W(x)|0> = x."""
    assert np.allclose(Q.qsp_block([0.0, 0.0], np.linspace(-1, 1, 7)), np.linspace(-1, 1, 7))


@pytest.mark.parametrize("coeffs", [[0, 1], [0, 0, 0, 1], [0.1, 0, 0.5, 0, 0.3], [0, 0.4, 0, -0.3]])
def test_phase_solve_reproduces_polynomial(coeffs):
    res = Q.qsp_phases(coeffs)
    x = np.linspace(-1, 1, 301)
    assert np.abs(Q.qsp_block(res.phases, x).real - cheb.chebval(x, coeffs)).max() < 1e-8
    assert np.allclose(res.phases, res.phases[::-1])


def test_phase_solve_rejects_mixed_parity():
    with pytest.raises(Q.QSPError):
        Q.qsp_phases([0.2, 0.3, 0.1])


def test_conjugate_phases_conjugate_the_block(rng):
    ph = rng.uniform(-np.pi, np.pi, 6)
    pc, g = Q.conjugate_phases(ph)
    x = np.linspace(-1, 1, 51)
    assert np.allclose(g * Q.qsp_block(pc, x), np.conj(Q.qsp_block(ph, x)), atol=1e-12)


def test_overlap_budget_and_rescaling():
    assert Q.overlap_error_budget(0.02, 0.36) == pytest.approx(math.sqrt(0.02) * 0.36 / math.sqrt(1 - 0.36 ** 2))
    assert Q.rescale_spectrum(np.array([-2.0, 2.0]), 2.0, 0.05) == pytest.approx([0.05, math.pi - 0.05])
    with pytest.raises(Q.QSPError):
        Q.overlap_error_budget(0.02, 1.0)


def test_step_polynomial_meets_band_constraints():
    mu, gap, eps = 1.2, 0.3, 0.05
    c, d = Q.step_polynomial(gap, mu, eps)
    assert d % 2 == 0 and np.all(c[1::2] == 0)
    v = Q.check_band(c, Q.Band.from_plan(mu, gap, 0.05), eps)
    assert v["pass_band"] <= eps and v["stop_band"] <= eps and v["sup"] <= 1.0


def test_infeasible_band_raises():
    with pytest.raises(Q.QSPError):
        Q.step_polynomial(gap=0.2, mu=0.05, eps=0.05)


def test_repetitions_for_failure():
    assert Q.repetitions_for_failure(0.01, 0.5) == 7
    assert Q.repetitions_for_failure(0.01, 1.0) == 1
    with pytest.raises(Q.QSPError):
        Q.repetitions_for_failure(0.0, 0.5)


def test_qet_filters_toy_hamiltonian():
    """Diagonal toy H: the filter suppresses every level above the gap."""
    E = np.array([-1.0, -0.2, 0.3, 1.0])
    H = np.diag(E)
    phi = np.ones(4) / 2
    plan = Q.build_plan(E[0], E[1], 1.5, eta=0.05, infidelity=0.02, gamma=0.25, gap=0.3)
    res = Q.qet_ground_state(H, phi, plan, rng=np.random.default_rng(0))
    assert res.success and res.fidelity >= 0.98


def test_qet_exhausts_repetitions():
    E = np.array([-1.0, -0.2, 0.3, 1.0])
    plan = Q.build_plan(E[0], E[1], 1.5, gamma=0.25, gap=0.3)
    phi = np.array([1e-4, 1, 1, 1]) / math.sqrt(3)
    with pytest.raises(Q.QSPError):
        Q.qet_ground_state(np.diag(E), phi / np.linalg.norm(phi), plan, max_repetitions=1,
                           rng=np.random.default_rng(1))


def test_curves_monotone_helpers():
    q = Q.qsp_curve(0.3, 40, 1e-6, 20)
    assert Q.is_monotone_decreasing(q) and q[0].error == pytest.approx(0.7)
    v = Q.vqe_curve([0.5, 0.6, 0.2, 0.3, 0.1], [10] * 5, 1e-5)
    assert [p.error for p in v] == [0.5, 0.2, 0.1]
    assert Q.is_monotone_decreasing(v)
