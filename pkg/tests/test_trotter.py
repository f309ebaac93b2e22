import numpy as np
import pytest
from scipy.linalg import expm

from hybridlgt import gates as G
from hybridlgt import hilbert as h
from hybridlgt import models as M
from hybridlgt import trotter as TR


def _step_error(params, build, step, dt, order):
    lay, _, H = build(params)
    U = G.exact_unitary(step(params, dt, order), lay)
    return TR.phase_aligned_distance(U, expm(-1j * dt * H))


@pytest.mark.parametrize("order,expected", [(1, 2.0), (2, 3.0)])
def test_z2_local_error_order(order, expected):
    p = M.Z2Params(L=3, g=0.8, U=0.5, J=1.0, N=2)
    dts = np.array([0.02, 0.04, 0.08])
    errs = [_step_error(p, M.build_z2_1d, TR.z2_step_circuit, d, order) for d in dts]
    assert np.polyfit(np.log(dts), np.log(errs), 1)[0] == pytest.approx(expected, abs=0.2)


def test_u1_second_order_local_error():
    p = M.U1Params(L=2, g=1.0, J=0.7, M=0.2, S=1.0)
    dts = np.array([0.02, 0.04, 0.08])
    errs = [_step_error(p, M.build_u1_1d, TR.u1_step_circuit, d, 2) for d in dts]
    assert np.polyfit(np.log(dts), np.log(errs), 1)[0] == pytest.approx(3.0, abs=0.2)


def test_evolve_snapshots_and_norm():
    p = M.Z2Params(L=2, N=1)
    lay = M.z2_layout(p)
    psi = h.fock_product(lay, [1, 0], "+")
    plan = TR.z2_plan(p, 1.0, 10, 2)
    out, snaps = TR.evolve(psi, plan, observe=lambda s: s.norm())
    assert len(snaps) == 11
    assert np.allclose(snaps, 1.0)
    assert plan.dt == pytest.approx(0.1)


def test_plan_validation():
    with pytest.raises(ValueError):
        TR.TrotterPlan(3, 1, 0.1, G.Circuit())


def test_h0_norm_golden():
    assert TR.z2_h0_norm(2, 1.0, 1.0, 1) == 8


def test_plaquette_cpi_count():
    c = TR.plaquette_bch(list(range(8)), 0, 1.0, 0.5, 0.01)
    assert c.count("CP") == 1152


def test_pair_hopping_fit_recovers_synthetic_rate():
    L, tp, shift = 5, 0.2, 0.05
    H = -tp * (np.eye(L, k=1) + np.eye(L, k=-1))
    H[0, 0] = H[-1, -1] = shift
    t = np.linspace(0, 8, 60)
    amps = np.array([expm(-1j * H * tk)[:, 2] for tk in t])
    fit = TR.fit_pair_hopping(t, 2 * np.abs(amps) ** 2, 2)
    assert fit.hopping == pytest.approx(tp, rel=1e-6)
    assert fit.rate == pytest.approx(tp / 2, rel=1e-6)
