import math

import numpy as np
import pytest

from hybridlgt import models as M
from hybridlgt import noise as NZ
from hybridlgt import vqe as V


def test_z2_two_site_one_layer_reaches_ground():
    spec = V.AnsatzSpec("z2", 1, M.Z2Params(L=2))
    tr = V.optimize(spec, V.OptimizerConfig(restarts=2, seed=0))
    assert V.relative_error(spec, tr.energy) < 1e-2


def test_u1_two_site_one_layer_reaches_ground():
    spec = V.AnsatzSpec("u1", 1, M.U1Params(L=2, S=1.0))
    tr = V.optimize(spec, V.OptimizerConfig(restarts=2, seed=0))
    assert V.relative_error(spec, tr.energy) < 1e-4


def test_ansatz_preserves_gauss_sector():
    spec = V.AnsatzSpec("z2", 2, M.Z2Params(L=3))
    psi = V.prepare(spec, np.random.default_rng(0).normal(size=spec.n_angles))
    P = V.sector_projector(spec)
    assert np.vdot(psi.data, P @ psi.data).real == pytest.approx(1.0, abs=1e-10)


def test_angle_count():
    spec = V.AnsatzSpec("z2", 3, M.Z2Params(L=3))
    assert spec.n_angles == 3 * (4 * 2 + 1)
    with pytest.raises(V.VQEError):
        V.AnsatzSpec("z2", 0, M.Z2Params(L=3))


def test_spsa_deterministic_for_seed():
    spec = V.AnsatzSpec("z2", 1, M.Z2Params(L=2))
    cfg = V.OptimizerConfig(mode="spsa", max_iter=30, seed=5, restarts=1, shots0=20)
    a, b = V.optimize(spec, cfg), V.optimize(spec, cfg)
    assert [r.energy for r in a.rows] == [r.energy for r in b.rows]
    assert np.array_equal(a.theta, b.theta)


def test_shot_schedule():
    cfg = V.OptimizerConfig(shots0=10, shot_growth=10, shot_period=1500)
    assert cfg.shots_at(0) == 10 and cfg.shots_at(1499) == 10 and cfg.shots_at(1500) == 100
    with pytest.raises(V.VQEError):
        V.OptimizerConfig(avg_every=5, avg_window=5)


def test_postselect_clean_states_keep_everything(z2_3site_spec, z2_3site_theta):
    psi = V.prepare(z2_3site_spec, z2_3site_theta)
    res = V.gauss_postselect(z2_3site_spec, [psi, psi])
    assert res.kept_fraction == pytest.approx(1.0)
    assert res.energy == pytest.approx(res.raw_energy)


def test_postselect_removes_gauss_violations(z2_3site_spec, z2_3site_theta):
    """A Z error on a link qubit leaves the sector; the projector removes it entirely."""
    from hybridlgt import gates as G
    import copy
    psi = V.prepare(z2_3site_spec, z2_3site_theta)
    bad = psi.copy()
    G.Circuit([G.qubit_rz(0, math.pi)]).apply(bad)
    res = V.gauss_postselect(z2_3site_spec, [psi, bad])
    assert res.kept_fraction == pytest.approx(0.5, abs=1e-9)
    assert res.energy == pytest.approx(z2_3site_spec.energy(psi), abs=1e-9)


def test_layer_duration_estimate_convention():
    """2 links: 2 * n_links * (2 CPi + BS) + SNAP + single-qubit gate."""
    t = V.layer_duration_estimate(M.Z2Params(L=3))
    assert t == pytest.approx(2 * 2 * (2e-6 + 0.25e-6) + 1e-6 + 1e-8)


def test_tau_sweep_small():
    rows = V.tau_sweep(M.U1Params(L=2, S=1.0), [0.0, 0.5], layers=1,
                       config=V.OptimizerConfig(restarts=1, seed=0))
    for r in rows:
        assert abs(r.field_vqe - r.field_ed) < 5e-2
