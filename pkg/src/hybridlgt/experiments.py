"""Experiment runners: one function per config kind, plus the atomic output writer.

Each runner writes deterministic CSV/JSON files into a scratch directory and
returns a :class:`RunOutcome`. :func:`run_experiment` moves the directory into
place only after every file and the manifest are written.
"""

from __future__ import annotations

import csv
import json
import math
import os
import shutil
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import BACKEND
from . import config as CF
from . import measurement as MS
from . import models as M
from . import noise as NZ
from . import qsp as Q
from . import resources as R
from . import trotter as TR
from . import verify as VF
from . import vqe as V
from .hilbert import StateVector


class VerificationFailure(RuntimeError):
    """A run finished but one of its correctness checks did not pass."""


@dataclass
class RunOutcome:
    outputs: dict[str, Path] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    passed: bool = True


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    if v is None:
        return ""
    return v


def write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(path: Path, obj) -> Path:
    CF.dump_json(_jsonable(obj), path)
    return path


# ----------------------------------------------------------------------------
# dynamics
# ----------------------------------------------------------------------------

def _dynamics_spec(cfg: CF.ExperimentConfig) -> V.AnsatzSpec:
    mc, dc = cfg.model, cfg.dynamics
    if mc.name == "z2":
        fock = list(dc.initial)
        N = sum(fock) if mc.N is None else mc.N
        params = replace(mc.params(), N=N)
        links, _ = V.z2_unit_filling_links(params, fock)
        return V.AnsatzSpec("z2", 1, params, (fock, links))
    params = mc.params()
    fock, _ = M.u1_vacuum_labels(params)
    return V.AnsatzSpec("u1", 1, params, (fock, "".join(str(b) for b in dc.initial)))


def _site_numbers(spec: V.AnsatzSpec, state: StateVector) -> list[float]:
    if spec.model == "z2":
        out = []
        for i in range(spec.params.L):
            pops = state.mode_populations(i)
            out.append(float(np.dot(pops, np.arange(pops.size))))
        return out
    lay = spec.layout
    return [float(np.sum(state.marginal(lay.qubit_axis(q))[1])) for q in range(spec.params.L)]


def run_dynamics(cfg: CF.ExperimentConfig, out: Path, workers: int) -> RunOutcome:
    dc = cfg.dynamics
    spec = _dynamics_spec(cfg)
    T = dc.dt * dc.steps
    plan = (TR.z2_plan if spec.model == "z2" else TR.u1_plan)(spec.params, T, dc.steps, dc.order)
    psi0 = spec.initial_state()
    _, snaps = TR.evolve(psi0.copy(), plan, observe=lambda s: (s.data.copy(), _site_numbers(spec, s)))
    L = spec.params.L
    header = ["step", "t"] + [f"n_{i}" for i in range(L)]
    if dc.compare_exact:
        B = spec.sector
        Hs = B.conj().T @ spec.hamiltonian @ B
        w, U = np.linalg.eigh((Hs + Hs.conj().T) / 2)
        c0 = U.conj().T @ (B.conj().T @ psi0.data)
        header += [f"exact_n_{i}" for i in range(L)] + ["fidelity"]
    rows, min_fid = [], 1.0
    for k, (vec, nums) in enumerate(snaps):
        t = k * plan.dt
        row = [k, t] + nums
        if dc.compare_exact:
            ex = B @ (U @ (np.exp(-1j * w * t) * c0))
            ex_state = StateVector(psi0.layout, ex)
            fid = float(abs(np.vdot(ex, vec)) ** 2)
            min_fid = min(min_fid, fid)
            row += _site_numbers(spec, ex_state) + [fid]
        rows.append(row)
    path = write_csv(out / "dynamics.csv", header, rows)
    summary = {"steps": dc.steps, "dt": dc.dt, "order": dc.order, "sites": L,
               "step_depth_time_s": plan.step_circuit.depth_time}
    if dc.compare_exact:
        summary["min_fidelity"] = min_fid
    if spec.model == "z2" and sorted(dc.initial)[-1] == 2 and sum(dc.initial) == 2:
        t = [r[1] for r in rows]
        fit = TR.fit_pair_hopping(t, np.array([r[2:2 + L] for r in rows]), list(dc.initial).index(2))
        summary["pair_hopping_fit"] = asdict(fit)
        summary["pair_rate_perturbative"] = spec.params.J ** 2 / (2 * spec.params.g) if spec.params.g else None
    return RunOutcome({"dynamics.csv": path}, summary)


# ----------------------------------------------------------------------------
# VQE
# ----------------------------------------------------------------------------

def _optimizer(cfg: CF.ExperimentConfig, workers: int) -> V.OptimizerConfig:
    vc = cfg.vqe
    return V.OptimizerConfig(mode=vc.mode, max_iter=vc.max_iter, seed=cfg.seed, restarts=vc.restarts,
                             init_scale=vc.init_scale, c=vc.c, first_step=vc.first_step,
                             avg_every=vc.avg_every, avg_window=vc.avg_window,
                             shots0=cfg.shots if vc.mode == "spsa" else None,
                             shot_growth=vc.shot_growth, shot_period=vc.shot_period, workers=workers)


def _circuit_time(cfg: CF.ExperimentConfig, spec: V.AnsatzSpec, circuit) -> float:
    if cfg.noise.circuit_time is not None:
        return cfg.noise.circuit_time
    if spec.model == "z2":
        return spec.layers * V.layer_duration_estimate(spec.params)
    return circuit.depth_time


def run_vqe(cfg: CF.ExperimentConfig, out: Path, workers: int) -> RunOutcome:
    vc = cfg.vqe
    spec = V.AnsatzSpec(cfg.model.name, vc.layers, cfg.model.params())
    noise = cfg.noise.model() if cfg.noise.enabled else None
    trace = V.optimize(spec, _optimizer(cfg, workers), noise=noise if vc.mode == "spsa" else None)
    e0, g = spec.exact_ground()
    psi = V.prepare(spec, trace.theta)
    summary = {"energy": trace.energy, "exact_energy": e0,
               "relative_error": V.relative_error(spec, trace.energy),
               "fidelity": float(abs(np.vdot(g, psi.data)) ** 2),
               "iterations": len(trace.rows), "aborted": trace.aborted}
    outs = {}
    trace.to_csv(out / "trace.csv")
    outs["trace.csv"] = out / "trace.csv"
    outs["theta.json"] = write_json(out / "theta.json", json.loads(trace.theta_json()))
    if vc.postselect and noise is not None:
        circ = V.ansatz_circuit(spec, trace.theta)
        T = _circuit_time(cfg, spec, circ)
        res = NZ.run_trajectories(circ, spec.initial_state(), noise, cfg.noise.trajectories,
                                  seed=cfg.seed, workers=workers, total_time=T)
        f, se = NZ.error_free_fraction(res)
        ps = V.gauss_postselect(spec, [r.state for r in res])
        summary["postselect"] = {"circuit_time_s": T, "trajectories": len(res),
                                 "error_free_fraction": f, "error_free_stderr": se, **asdict(ps)}
        outs["jumps.json"] = out / "jumps.json"
        (out / "jumps.json").write_text(NZ.jumps_to_json(res) + "\n")
    outs["summary.json"] = write_json(out / "summary.json", summary)
    return RunOutcome(outs, summary)


# ----------------------------------------------------------------------------
# tau sweep
# ----------------------------------------------------------------------------

def tau_grid(points: int, tau_max: float) -> np.ndarray:
    """Uniform grid on [-tau_max, tau_max]; points landing on +/-pi (a level crossing)
    are moved by a tenth of the spacing towards zero."""
    taus = np.linspace(-tau_max, tau_max, points)
    step = taus[1] - taus[0]
    hit = np.isclose(np.abs(taus), math.pi, atol=1e-9)
    taus[hit] -= np.sign(taus[hit]) * step / 10
    return taus


def run_tau_sweep(cfg: CF.ExperimentConfig, out: Path, workers: int) -> RunOutcome:
    tc = cfg.tau_sweep
    opt = V.OptimizerConfig(restarts=1, seed=cfg.seed)
    rows = V.tau_sweep(cfg.model.params(), tau_grid(tc.points, tc.tau_max), tc.layers, opt)
    path = write_csv(out / "tau_sweep.csv", ["tau", "field_vqe", "field_ed", "energy_vqe", "energy_ed"],
                     [[r.tau, r.field_vqe, r.field_ed, r.energy_vqe, r.energy_ed] for r in rows])
    dev = max(abs(r.field_vqe - r.field_ed) for r in rows)
    return RunOutcome({"tau_sweep.csv": path}, {"points": len(rows), "max_field_deviation": dev})


# ----------------------------------------------------------------------------
# QSP
# ----------------------------------------------------------------------------

def run_qsp(cfg: CF.ExperimentConfig, out: Path, workers: int) -> RunOutcome:
    qc, mc = cfg.qsp, cfg.model
    spec = V.AnsatzSpec("z2", qc.layers, mc.params())
    plan = Q.plan_for_spec(spec, qc.eta, qc.infidelity, qc.gamma)
    _, g = spec.exact_ground()
    res = Q.qet_ground_state(spec.hamiltonian, spec.initial_state().data, plan, qc.max_repetitions,
                             np.random.default_rng(cfg.seed), ground=g)
    outs = {"plan.json": out / "plan.json"}
    (out / "plan.json").write_text(plan.to_json() + "\n")
    summary = {"degree": plan.degree, "eps_poly": plan.eps_poly, "band_width": plan.band.width,
               "gamma": plan.gamma, "success_probability": res.success_probability,
               "repetitions": res.repetitions, "fidelity": res.fidelity,
               "target_fidelity": 1 - qc.infidelity}
    if qc.vqe_iterations > 0:
        opt = V.OptimizerConfig(mode="spsa", max_iter=qc.vqe_iterations, seed=cfg.seed, restarts=1,
                                shots0=cfg.shots or 10, workers=workers)
        trace = V.optimize(spec, opt)
        curves = Q.qsp_vs_vqe_curve(spec, trace, plan, qc.curve_shots)
        Q.curves_to_csv(curves, out / "curves.csv")
        outs["curves.csv"] = out / "curves.csv"
        summary["curves_monotone"] = all(Q.is_monotone_decreasing(c) for c in curves.values())
    outs["summary.json"] = write_json(out / "summary.json", summary)
    passed = res.fidelity >= 1 - qc.infidelity
    return RunOutcome(outs, summary, passed)


# ----------------------------------------------------------------------------
# resources
# ----------------------------------------------------------------------------

def resource_tables(rc: CF.ResourcesConfig, out: Path) -> dict[str, Path]:
    rows = R.fidelity_curves(rc.fidelities, rc.cutoffs, m=rc.newton)
    R.write_fidelity_csv(rows, out / "fidelity.csv")
    cost = []
    for model in ("z2", "u1"):
        for c in rc.cutoffs:
            rep = R.CostReport(model, c, rc.newton)
            cost.append([model, c, rep.n, rep.qubit_cnot, rep.hybrid_cpi, rep.ratio])
    write_csv(out / "costs.csv", ["model", "cutoff", "n", "qubit_cnot", "hybrid_cpi", "ratio"], cost)
    return {"fidelity.csv": out / "fidelity.csv", "costs.csv": out / "costs.csv"}


def run_resources(cfg: CF.ExperimentConfig, out: Path, workers: int) -> RunOutcome:
    rc = cfg.resources
    outs = resource_tables(rc, out)
    ns = [4, 8, 16, 32, 64]
    summary = {"z2_loglog_slope": R.loglog_slope(ns, [R.z2_cnot_count(n, rc.newton) for n in ns]),
               "hybrid_cpi": dict(R.HYBRID_CPI)}
    return RunOutcome(outs, summary)


# ----------------------------------------------------------------------------
# decay
# ----------------------------------------------------------------------------

def _decay_curves(args):
    N, rate, n_traj, seed, t_max, grid = args
    rows = []
    for enc in ("oscillator", "fock_binary"):
        t, n1, n2 = NZ.trajectory_number_curves(N, enc, rate, n_traj, seed, t_max / rate, grid)
        for tk, a, b in zip(t, n1, n2):
            closed = (NZ.analytic_mode_nsq(N, N * N, rate, tk) if enc == "oscillator"
                      else NZ.analytic_fock_binary_nsq(N, rate, tk))
            rows.append([N, enc, tk, a, b, closed])
    return rows


def run_decay(cfg: CF.ExperimentConfig, out: Path, workers: int) -> RunOutcome:
    dc = cfg.decay
    scan = NZ.effective_decay_time_scan(dc.N_values, dc.rate, dc.rate)
    outs = {"decay_times.csv": write_csv(
        out / "decay_times.csv", ["N", "oscillator", "fock_binary"],
        [[r.N, r.oscillator, r.fock_binary] for r in scan])}
    summary = {"N_values": list(dc.N_values)}
    if dc.trajectories > 0:
        jobs = [(N, dc.rate, dc.trajectories, cfg.seed, dc.t_max, dc.grid) for N in dc.N_values]
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
                parts = list(pool.map(_decay_curves, jobs))
        else:
            parts = [_decay_curves(j) for j in jobs]
        rows = [r for p in parts for r in p]
        outs["decay_trajectories.csv"] = write_csv(
            out / "decay_trajectories.csv", ["N", "encoding", "t", "n_mean", "nsq_mean", "nsq_closed"], rows)
        rms = {}
        for N in dc.N_values:
            for enc in ("oscillator", "fock_binary"):
                sel = [r for r in rows if r[0] == N and r[1] == enc]
                d = np.array([(r[4] - r[5]) / sel[0][5] for r in sel])
                rms[f"{enc}:{N}"] = float(np.sqrt(np.mean(d ** 2)))
        summary["rms_relative_deviation"] = rms
    outs["summary.json"] = write_json(out / "summary.json", summary)
    return RunOutcome(outs, summary)


# ----------------------------------------------------------------------------
# observables
# ----------------------------------------------------------------------------

def run_observables(cfg: CF.ExperimentConfig, out: Path, workers: int) -> RunOutcome:
    oc = cfg.observables
    params = cfg.model.params()
    spec = V.AnsatzSpec("z2", 1, params)
    _, g = spec.exact_ground()
    psi = StateVector(spec.layout, g.copy())
    obs = MS.observable_suite(psi, params.L)
    rng = np.random.default_rng(cfg.seed)
    pairs = []
    for i, j in oc.pairs:
        hop, hop_se = MS.hopping_expectation_bs(psi, i, j, cfg.shots, rng)
        links = list(range(min(i, j), max(i, j)))
        so, so_se = MS.string_order(psi, i, j, oc.theta, links, cfg.shots, rng)
        exact = float(np.vdot(g, MS.string_operator(spec.layout, i, j, links) @ g).real)
        pairs.append({"i": i, "j": j, "hopping": hop, "hopping_stderr": hop_se,
                      "string_order": so, "string_order_stderr": so_se, "string_order_exact": exact})
    summary = {"parity": obs.parity, "clump": obs.clump, "fluctuations": obs.fluctuations,
               "pair_hopping": obs.pair_hopping, "string_order": obs.string_order,
               "per_site": {k: list(v) for k, v in obs.per_site.items()},
               "pairs": pairs}
    if oc.stiffness:
        summary["stiffness"] = MS.stiffness(params)
    return RunOutcome({"observables.json": write_json(out / "observables.json", summary)}, summary)


# ----------------------------------------------------------------------------
# gate verification
# ----------------------------------------------------------------------------

def verify_outcome(suites, draws: int, seed: int, out: Path) -> RunOutcome:
    results = []
    for s in suites:
        if s not in VF.SUITES:
            raise CF.ConfigError(f"unknown verify suite {s!r}; known: {sorted(VF.SUITES)}")
        results += VF.run_suite(s, draws, seed)
    path = write_json(out / "verify.json", {"checks": [r.to_dict() for r in results]})
    passed = all(r.passed for r in results)
    summary = {"checks": len(results), "failed": [r.name for r in results if not r.passed],
               "report": VF.format_report(results)}
    return RunOutcome({"verify.json": path}, summary, passed)


def run_gate_verify(cfg: CF.ExperimentConfig, out: Path, workers: int) -> RunOutcome:
    return verify_outcome(cfg.verify.suites, cfg.verify.draws, cfg.seed, out)


RUNNERS: dict[str, Callable[[CF.ExperimentConfig, Path, int], RunOutcome]] = {
    "dynamics": run_dynamics, "vqe": run_vqe, "tau-sweep": run_tau_sweep, "qsp": run_qsp,
    "resources": run_resources, "decay": run_decay, "observables": run_observables,
    "gate-verify": run_gate_verify,
}


# ----------------------------------------------------------------------------
# atomic output
# ----------------------------------------------------------------------------

def run_into(target: Path, cfg: CF.ExperimentConfig,
             body: Callable[[Path], RunOutcome]) -> tuple[Path, RunOutcome]:
    """Run ``body`` in a scratch directory next to ``target``, then rename it into place."""
    target = Path(target)
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{target.name}.", dir=target.parent))
    try:
        outcome = body(tmp)
        outcome.outputs = {k: tmp / Path(p).name for k, p in outcome.outputs.items()}
        write_json(tmp / "manifest.json", CF.build_manifest(cfg, outcome.outputs, BACKEND))
        if target.exists():
            shutil.rmtree(target)
        os.replace(tmp, target)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    outcome.outputs = {k: target / Path(p).name for k, p in outcome.outputs.items()}
    return target, outcome


def run_experiment(cfg: CF.ExperimentConfig, out_root: Path | None = None,
                   workers: int | None = None) -> tuple[Path, RunOutcome]:
    root = Path(out_root) if out_root is not None else CF.output_root()
    target = Path(cfg.output_dir) if cfg.output_dir else root / cfg.name
    w = workers or cfg.workers or 1
    return run_into(target, cfg, lambda tmp: RUNNERS[cfg.kind](cfg, tmp, w))
