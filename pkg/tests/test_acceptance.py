"""Acceptance criteria 1-11.

Each test records one ``ACCEPTANCE <n> PASS|FAIL`` line (printed in the
"acceptance criteria" section of the terminal summary) and then asserts the
same condition. Tolerances are pinned as module constants below. Run on its
own with

    pytest tests/test_acceptance.py -v
"""

from __future__ import annotations

import math
from collections import Counter

import numpy as np
import pytest
from scipy.linalg import expm

from hybridlgt import composite as C
from hybridlgt import config as CF
from hybridlgt import experiments as EX
from hybridlgt import gates as G
from hybridlgt import hilbert as h
from hybridlgt import measurement as MS
from hybridlgt import models as M
from hybridlgt import noise as NZ
from hybridlgt import resources as R
from hybridlgt import trotter as TR
from hybridlgt import verify as VF

pytestmark = pytest.mark.slow

# --- pinned tolerances -------------------------------------------------------
GATE_TOL, GATE_DRAWS = 1e-10, 20
GAMMA_EXP, GAMMA_EXP_TOL = 3.0, 0.3
HIGH_EXP, HIGH_EXP_TOL = 5.0, 0.5
PLAQ_EXP, PLAQ_EXP_TOL = 1.25, 0.15
PLAQ_CP = 1152
LIGHTCONE_TOL = 0.05
CONFINED_MIN, CONFINED_T = 0.9, 4.0
PAIR_RATE_REL = 0.25
VQE_TOL = {"vqe_z2_2site": 1e-2, "vqe_z2_3site": 1e-2, "vqe_u1_2site": 1e-4}
TAU_POINTS, TAU_TOL, TAU_JUMP_RATIO = 21, 5e-2, 10.0
NOISY_TRAJ, NOISY_SEED = 4000, 12345
ERROR_FREE, ERROR_FREE_TOL = 0.82, 0.04
KEPT_RANGE = (0.80, 0.92)
SEPARATION_SIGMA = 3.0
DECAY_TRAJ, DECAY_N, DECAY_REL = 10_000, range(2, 9), 0.01
BINARY_RATE, BINARY_RATE_REL = 5 / 3, 0.05
SURVIVAL, SURVIVAL_SIGMA = math.exp(-0.5), 3.0
QSP_FID, QSP_GAMMA, QSP_GAMMA_TOL = 0.98, 0.36, 0.02
ORDER2_SLOPE, ORDER2_TOL = 3.0, 0.2
H0_NORM = 8
Z_MAX, BATCHES, BIAS_EXP, BIAS_TOL = 4.0, 50, 2.0, 0.3


def slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def run_shipped(name: str, tmp_path, **overrides):
    cfg = CF.load_config(name)
    if overrides:
        data = cfg.canonical()
        for path, value in overrides.items():
            sec, _, key = path.partition(".")
            if key:
                data[sec][key] = value
            else:
                data[sec] = value
        cfg = CF.ExperimentConfig.model_validate(data)
    return EX.run_experiment(cfg.override(output_dir=str(tmp_path / name)), workers=1)


# ----------------------------------------------------------------------------

def test_c01_gate_synthesis_exact(report):
    results = [r for s in VF.SUITES for r in VF.run_suite(s, GATE_DRAWS, seed=0, tol=GATE_TOL)]
    bad = [r.name for r in results if not r.passed]
    worst = max(r.max_deviation for r in results if r.tol == GATE_TOL)
    ok = not bad
    report(1, ok, f"{len(results)} checks x {GATE_DRAWS} draws, worst |dU|max={worst:.1e}"
                  + (f", failing: {bad}" if bad else ""))
    assert ok


def test_c02_bch_scaling(report):
    lay = h.new_layout([2, 2, 2], 1)

    def gen(x, y, phi, P):
        a, b = h.mode_ops(lay, x)[0], h.mode_ops(lay, y)[0]
        hop = np.exp(1j * phi) * a.conj().T @ b
        return h.qubit_op(lay, 0, P) @ (hop + hop.conj().T)

    A, B = gen(0, 1, 0.3, "Z"), gen(1, 2, -0.7, "X")
    eA, eB = TR._elementary(0, 0, 1, 0.3, "Z"), TR._elementary(0, 1, 2, -0.7, "X")
    ths = np.array([0.02, 0.04, 0.08, 0.16])
    exps = {}
    for name, f in (("gamma", C.bch_commutator), ("high", C.bch_commutator_high_order)):
        errs = [np.linalg.norm(G.exact_unitary(f(eA, eB, t), lay) - expm(-t * t * (A @ B - B @ A)), 2)
                for t in ths]
        exps[name] = slope(ths, errs)
    lay8 = h.new_layout([1] * 8, 1)
    S, g = 0.5, 1.0
    Hp = -TR.plaquette_operator(lay8, range(8)) / (4 * g * g * (S * (S + 1)) ** 2)
    HZ = Hp @ h.qubit_op(lay8, 0, "Z")
    ts = np.array([1e-3, 4e-3, 1.6e-2, 6.4e-2])
    errs = [np.linalg.norm(G.exact_unitary(TR.plaquette_bch(list(range(8)), 0, g, S, t), lay8)
                           - expm(-1j * t * HZ), 2) for t in ts]
    exps["plaquette"] = slope(ts, errs)
    n_cp = Counter(op.kind for op in TR.plaquette_bch(list(range(8)), 0, g, S, 0.01).ops)["CP"]
    ok = (abs(exps["gamma"] - GAMMA_EXP) <= GAMMA_EXP_TOL and abs(exps["high"] - HIGH_EXP) <= HIGH_EXP_TOL
          and abs(exps["plaquette"] - PLAQ_EXP) <= PLAQ_EXP_TOL and n_cp == PLAQ_CP)
    report(2, ok, f"exponents gamma={exps['gamma']:.3f} high={exps['high']:.3f} "
                  f"plaquette={exps['plaquette']:.3f}, plaquette CP count={n_cp}")
    assert ok


def _dynamics(name, tmp_path):
    path, out = run_shipped(name, tmp_path)
    data = np.genfromtxt(path / "dynamics.csv", delimiter=",", names=True)
    L = out.summary["sites"]
    n = np.column_stack([data[f"n_{i}"] for i in range(L)])
    ex = np.column_stack([data[f"exact_n_{i}"] for i in range(L)])
    return data["t"], n, ex, out.summary


def test_c03_dynamics(tmp_path, report):
    t, n, ex, _ = _dynamics("dynamics_lightcone", tmp_path)
    dev_free = float(np.abs(n - ex).max())
    t, n, ex, _ = _dynamics("dynamics_confined", tmp_path)
    central = float(n[t <= CONFINED_T + 1e-9, 2].min())
    t, n, ex, summ = _dynamics("dynamics_pair_transfer", tmp_path)
    target = summ["pair_rate_perturbative"]
    rate_ed = TR.fit_pair_hopping(t, ex, 2).rate
    rate_tr = summ["pair_hopping_fit"]["rate"]
    rel = abs(rate_ed - target) / target
    ok = dev_free <= LIGHTCONE_TOL and central >= CONFINED_MIN and rel <= PAIR_RATE_REL
    report(3, ok, f"g=0 max|n-ED|={dev_free:.4f}; g=5 min central n(Jt<=4)={central:.4f}; "
                  f"pair rate ED={rate_ed:.4f} (Trotter {rate_tr:.4f}) vs J^2/2g={target:.4f}, "
                  f"rel={rel:.3f}")
    assert ok


def test_c04_vqe_noiseless(tmp_path, report):
    errs = {name: run_shipped(name, tmp_path)[1].summary["relative_error"] for name in VQE_TOL}
    ok = all(errs[k] <= VQE_TOL[k] for k in VQE_TOL)
    report(4, ok, ", ".join(f"{k} rel={v:.2e} (tol {VQE_TOL[k]:.0e})" for k, v in errs.items()))
    assert ok


def test_c05_tau_sweep(tmp_path, report):
    path, out = run_shipped("tau_sweep", tmp_path)
    d = np.genfromtxt(path / "tau_sweep.csv", delimiter=",", names=True)
    dev = float(np.abs(d["field_vqe"] - d["field_ed"]).max())
    tau, f = d["tau"], d["field_ed"]
    # first-order jump: the largest field step sits within one grid spacing of
    # each of tau = -pi, +pi and dwarfs every step further than 1.5 spacings away
    spacing = tau[1] - tau[0]
    steps, mids = np.abs(np.diff(f)), (tau[1:] + tau[:-1]) / 2
    jumps, far = [], []
    for s in (-math.pi, math.pi):
        half = mids * s > 0
        k = int(np.argmax(np.where(half, steps, -1)))
        jumps.append((mids[k], steps[k]))
        far.append(steps[half & (np.abs(mids - s) > 1.5 * spacing)].max())
    jump_ok = all(abs(m - s) <= spacing and st >= TAU_JUMP_RATIO * fr
                  for (m, st), fr, s in zip(jumps, far, (-math.pi, math.pi)))
    ok = len(tau) == TAU_POINTS and dev <= TAU_TOL and jump_ok
    report(5, ok, f"{len(tau)} points, max|VQE-ED|={dev:.2e}, largest steps "
                  + ", ".join(f"{st:.3f} at tau={m:+.3f}" for m, st in jumps)
                  + f", largest far steps {far[0]:.1e}/{far[1]:.1e}")
    assert ok


def test_c06_noisy_postselection(tmp_path, report):
    _, out = run_shipped("vqe_noisy_postselect", tmp_path, **{"noise.trajectories": NOISY_TRAJ,
                                                            "seed": NOISY_SEED})
    ps = out.summary["postselect"]
    f, se = ps["error_free_fraction"], ps["error_free_stderr"]
    kept = ps["kept_fraction"]
    sep = (ps["raw_energy"] - ps["energy"]) / math.hypot(ps["raw_stderr"], ps["energy_stderr"])
    checks = {"error-free": abs(f - ERROR_FREE) <= ERROR_FREE_TOL,
              "kept": KEPT_RANGE[0] <= kept <= KEPT_RANGE[1],
              "separation": ps["energy"] < ps["raw_energy"] and sep >= SEPARATION_SIGMA}
    ok = all(checks.values())
    report(6, ok, f"{ps['trajectories']} traj over {1e6 * ps['circuit_time_s']:.2f} us: error-free "
                  f"{f:.4f}+-{se:.4f} (target {ERROR_FREE}+-{ERROR_FREE_TOL}), kept {kept:.4f}, "
                  f"E_ps={ps['energy']:.3f} vs E_raw={ps['raw_energy']:.3f} ({sep:.1f} sigma); "
                  f"sub-checks {checks}")
    assert ok


def test_c07_resource_golden(report):
    vals = {"schwinger(2)": (R.schwinger_cnot_count(2), 56), "schwinger(1)": (R.schwinger_cnot_count(1), 36),
            "N_CBS(2)": (R.fock_binary_bs_count(2, conditional=True), 155736),
            "hybrid z2": (R.hybrid_counts("z2"), 2), "hybrid u1": (R.hybrid_counts("u1"), 8),
            "hybrid plaquette": (R.hybrid_counts("plaquette"), 1152)}
    ratio = R.CostReport("z2", cutoff=3).ratio
    ok = all(a == b for a, b in vals.values()) and ratio > 1e4
    report(7, ok, ", ".join(f"{k}={a}" for k, (a, _) in vals.items()) + f", z2 ratio(n=2)={ratio:.0f}")
    assert ok


def test_c08_decay_analytics(report):
    worst = 0.0
    for N in DECAY_N:
        for enc in ("oscillator", "fock_binary"):
            t, n1, n2 = NZ.trajectory_number_curves(N, enc, 1.0, DECAY_TRAJ, seed=N, t_max=2.0, grid=41)
            c1 = np.array([N * math.exp(-x) for x in t])
            c2 = np.array([NZ.analytic_mode_nsq(N, N * N, 1.0, x) if enc == "oscillator"
                           else NZ.analytic_fock_binary_nsq(N, 1.0, x) for x in t])
            for got, ref in ((n1, c1), (n2, c2)):
                worst = max(worst, float(np.sqrt(np.mean(((got - ref) / ref[0]) ** 2))))
    ks = range(4, 9)
    rates = [NZ.fock_binary_short_time_rate(2 ** k - 1) for k in ks]
    rate_dev = max(abs(r - BINARY_RATE) / BINARY_RATE for r in rates)
    N, kappa = 4, 1.0
    t_s = 0.5 / (N * kappa)
    psi = h.basis_state(h.new_layout([N], 0), [N])
    alive = np.array([not NZ.mode_decay_trajectory(psi, 0, kappa, t_s, seed=7, trajectory_id=i).jumps
                      for i in range(DECAY_TRAJ)], dtype=float)
    p, se = alive.mean(), math.sqrt(SURVIVAL * (1 - SURVIVAL) / DECAY_TRAJ)
    ok = worst <= DECAY_REL and rate_dev <= BINARY_RATE_REL and abs(p - SURVIVAL) <= SURVIVAL_SIGMA * se
    report(8, ok, f"worst RMS rel dev of <n>,<n^2> over N=2..8 = {worst:.4f}; Fock-binary rate "
                  f"k=4..8 max dev from 5/3 = {rate_dev:.3f}; survival {p:.4f} vs {SURVIVAL:.4f} "
                  f"({abs(p - SURVIVAL) / se:.1f} sigma)")
    assert ok


def test_c09_qsp_ground_state(tmp_path, report):
    _, out = run_shipped("qsp_ground_state", tmp_path)
    s = out.summary
    F0 = s["gamma"]  # ED |<E0|phi>|^2 of the start state
    p = s["success_probability"]
    ok = (abs(F0 - QSP_GAMMA) <= QSP_GAMMA_TOL and s["fidelity"] >= QSP_FID
          and 0.5 * F0 <= p <= 1.5 * F0 and s["curves_monotone"])
    report(9, ok, f"ED |<E0|phi>|^2={F0:.4f}, degree {s['degree']}, fidelity {s['fidelity']:.5f}, "
                  f"p_success={p:.4f} in [{0.5 * F0:.3f}, {1.5 * F0:.3f}] "
                  f"(squaring 0.36 again would give [{0.5 * F0 ** 2:.3f}, {1.5 * F0 ** 2:.3f}]), "
                  f"curves monotone={s['curves_monotone']}")
    assert ok


def _step_error(params, build, step, dt):
    lay, _, H = build(params)
    return TR.phase_aligned_distance(G.exact_unitary(step(params, dt, 2), lay), expm(-1j * dt * H))


def test_c10_trotter_order(report):
    dts = np.array([0.02, 0.04, 0.08])
    pz = M.Z2Params(L=3, g=0.8, U=0.5, J=1.0, N=2)
    pu = M.U1Params(L=2, g=1.0, J=0.7, M=0.2, S=1.0)
    sz = slope(dts, [_step_error(pz, M.build_z2_1d, TR.z2_step_circuit, d) for d in dts])
    su = slope(dts, [_step_error(pu, M.build_u1_1d, TR.u1_step_circuit, d) for d in dts])
    h0 = TR.z2_h0_norm(2, 1.0, 1.0, 1)
    ok = abs(sz - ORDER2_SLOPE) <= ORDER2_TOL and abs(su - ORDER2_SLOPE) <= ORDER2_TOL and h0 == H0_NORM
    report(10, ok, f"second-order slopes Z2={sz:.3f} U(1)={su:.3f}; ||H0||(L=2,g=U=N=1)={h0}")
    assert ok


def _zscore(estimates, truth) -> float:
    e = np.asarray(estimates)
    return float(abs(e.mean() - truth) / (e.std(ddof=1) / math.sqrt(len(e))))


def test_c11_measurement_estimators(report):
    rng = np.random.default_rng(2024)
    lay = h.new_layout([2, 2], 0)
    v = rng.normal(size=lay.dim) + 1j * rng.normal(size=lay.dim)
    tab = lay.occupation_table()
    v[tab[:, 0] + tab[:, 1] > 2] = 0.0  # beamsplitter readout domain
    psi = h.StateVector(lay, v).normalize()
    a, b = h.mode_ops(lay, 0)[0], h.mode_ops(lay, 1)[0]
    hop = a.conj().T @ b
    hop_truth = h.expectation(psi, hop + hop.conj().T).real
    z_hop = _zscore([MS.hopping_expectation_bs(psi, 0, 1, 500, rng)[0] for _ in range(BATCHES)], hop_truth)

    lay2 = h.new_layout([1, 1], 1)
    w = rng.normal(size=lay2.dim) + 1j * rng.normal(size=lay2.dim)
    phi = h.StateVector(lay2, w).normalize()
    theta = 0.3
    so_exact_theta = MS.string_order(phi, 0, 1, theta, [0])[0]
    z_so = _zscore([MS.string_order(phi, 0, 1, theta, [0], 2000, rng)[0] for _ in range(BATCHES)],
                   so_exact_theta)
    op = h.expectation(phi, MS.string_operator(lay2, 0, 1, [0])).real
    ths = np.array([0.05, 0.1, 0.2])
    bexp = slope(ths, [abs(MS.string_order(phi, 0, 1, t, [0])[0] - op) for t in ths])
    ok = z_hop <= Z_MAX and z_so <= Z_MAX and abs(bexp - BIAS_EXP) <= BIAS_TOL
    report(11, ok, f"z(hopping)={z_hop:.2f}, z(string order, theta={theta})={z_so:.2f} over {BATCHES} "
                   f"batches; string-order bias exponent={bexp:.3f}")
    assert ok
