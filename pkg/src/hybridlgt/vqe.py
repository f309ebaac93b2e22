"""Variational ground-state search: hardware-shaped ansatze for both lattice models,
a deterministic optimizer, SPSA with parameter averaging and a growing shot budget,
and Gauss-law post-selection of noisy runs.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize

from . import composite as C
from . import gates as G
from . import measurement as MS
from . import models as M
from . import noise as NZ
from .gates import Circuit
from .hilbert import StateVector, SystemLayout, annihilation, fock_product


class VQEError(RuntimeError):
    """Optimizer divergence or an inconsistent ansatz specification."""


# ----------------------------------------------------------------------------
# ansatz specification
# ----------------------------------------------------------------------------

def z2_unit_filling_links(params: M.Z2Params, fock: Sequence[int] | None = None) -> tuple[str, list[int]]:
    """Link X-labels making G_i = +1 on every site but the last, and the resulting targets.

    Walking left to right, x_i = x_{i-1} (-1)^{n_i} fixes G_i = +1; the last site then
    carries (-1)^N times the product of the others, which is -1 for odd N.
    """
    fock = [1] * params.L if fock is None else list(fock)
    x_prev, labels, targets = 1, [], []
    for i in range(params.L - 1):
        x = x_prev * (-1) ** fock[i]
        labels.append("+" if x > 0 else "-")
        targets.append(1)
        x_prev = x
    targets.append(int(x_prev * (-1) ** fock[-1]))
    return "".join(labels), targets


@dataclass
class AnsatzSpec:
    """Model, layer count and initial-state descriptor of a layered ansatz.

    ``initial`` is (Fock occupations, qubit labels). Z2 defaults to unit filling
    with link labels chosen by :func:`z2_unit_filling_links`; U(1) defaults to the
    staggered vacuum.
    """

    model: str
    layers: int
    params: M.Z2Params | M.U1Params
    initial: tuple[Sequence[int], str] | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.model not in ("z2", "u1"):
            raise VQEError(f"unknown model {self.model!r}")
        if self.layers < 1:
            raise VQEError("layers must be >= 1")
        if self.model == "z2":
            if not isinstance(self.params, M.Z2Params) or self.params.matter != "boson":
                raise VQEError("z2 ansatz needs bosonic Z2Params")
            if self.params.twist is not None:
                raise VQEError("z2 ansatz is defined for open chains")
        elif not isinstance(self.params, M.U1Params):
            raise VQEError("u1 ansatz needs U1Params")
        if self.initial is None:
            if self.model == "z2":
                links, _ = z2_unit_filling_links(self.params)
                self.initial = ([1] * self.params.L, links)
            else:
                fock, bits = M.u1_vacuum_labels(self.params)
                self.initial = (fock, "".join(str(b) for b in bits))

    # ---- sizes -------------------------------------------------------------
    @property
    def per_layer(self) -> int:
        if self.model == "z2":
            return 4 * self.params.n_links + 1
        return 4

    @property
    def n_angles(self) -> int:
        return self.per_layer * self.layers

    # ---- cached physics ----------------------------------------------------
    def _get(self, key, make):
        if key not in self._cache:
            self._cache[key] = make()
        return self._cache[key]

    @property
    def built(self):
        if self.model == "z2":
            return self._get("built", lambda: M.build_z2_1d(self.params))
        return self._get("built", lambda: M.build_u1_1d(self.params))

    @property
    def layout(self) -> SystemLayout:
        return self.built[0]

    @property
    def hamiltonian(self) -> np.ndarray:
        return self.built[2]

    @property
    def gauss(self) -> list[M.GaussOperator]:
        def make():
            if self.model == "z2":
                ops = M.gauss_ops_z2(self.layout, self.params)
                for g, t in zip(ops, self.gauss_targets):
                    g.target = float(t)
                return ops
            return M.gauss_ops_u1(self.layout, self.params)
        return self._get("gauss", make)

    @property
    def gauss_targets(self) -> list[int]:
        if self.model == "u1":
            return [0] * self.params.L
        fock, links = self.initial
        psi = self.initial_state()
        ops = M.gauss_ops_z2(self.layout, self.params)
        return [int(round(np.vdot(psi.data, g.op @ psi.data).real)) for g in ops]

    def initial_state(self) -> StateVector:
        fock, labels = self.initial
        return fock_product(self.layout, fock, labels)

    @property
    def sector(self) -> np.ndarray:
        """Orthonormal basis of the ansatz's symmetry sector (columns)."""
        def make():
            if self.model == "z2":
                return M.sector_basis(self.layout, self.gauss, self.gauss_targets,
                                      M.z2_total_number(self.layout, self.params),
                                      float(sum(self.initial[0])))
            return M.u1_physical_basis(self.layout, self.params)
        return self._get("sector", make)

    def sector_spectrum(self) -> np.ndarray:
        """All eigenvalues of H inside the sector, ascending."""
        def make():
            B = self.sector
            Hs = B.conj().T @ self.hamiltonian @ B
            return np.linalg.eigvalsh((Hs + Hs.conj().T) / 2)
        return self._get("spectrum", make)

    def exact_ground(self) -> tuple[float, np.ndarray]:
        """Lowest energy and state in the ansatz's symmetry sector (ED oracle)."""
        def make():
            w, v = M.sector_ground(self.hamiltonian, self.sector, 1)
            return float(w[0]), v[:, 0]
        return self._get("ground", make)

    def energy(self, state: StateVector) -> float:
        return float(np.vdot(state.data, self.hamiltonian @ state.data).real)


# ----------------------------------------------------------------------------
# circuits
# ----------------------------------------------------------------------------

def _split(theta: np.ndarray, spec: AnsatzSpec) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (spec.n_angles,):
        raise VQEError(f"expected {spec.n_angles} angles, got {theta.shape}")
    return theta.reshape(spec.layers, spec.per_layer)


def z2_layer(params: M.Z2Params, angles: Sequence[float]) -> Circuit:
    """One layer: even then odd bonds U2 U1, per-site U4 (SNAP), per-link U3 (Rx).

    Angles are ordered [(alpha_l, beta_l) per link..., delta_i per site..., gamma_l per link...].
    U1(b) = exp(-b Z (a_i^dag a_j - h.c.)) and U2(a) = exp(i a Z (a_i^dag a_j + h.c.)) are
    conditional beamsplitters; U3(g) = exp(-i g X) and U4(d) = exp(-i d n^2).
    """
    nl, L = params.n_links, params.L
    ang = list(angles)
    ab = ang[:2 * nl]
    delta = ang[2 * nl:2 * nl + L]
    gamma = ang[2 * nl + L:]
    c = Circuit()
    for parity in (0, 1):
        for (i, j, l) in M.z2_bonds(params):
            if l % 2 != parity:
                continue
            alpha, beta = ab[2 * l], ab[2 * l + 1]
            c.append(C.conditional_beamsplitter(l, i, j, -math.pi / 2, beta))
            c.append(C.conditional_beamsplitter(l, i, j, 0.0, -alpha))
    for i in range(L):
        c.append(G.snap(None, i, [delta[i] * n * n for n in range(params.nmax + 1)]))
    for l in range(nl):
        c.append(G.qubit_rx(l, 2 * gamma[l]))
    return c


def layer_duration_estimate(params: M.Z2Params, durations: G.GateDurations = G.DEFAULT_DURATIONS) -> float:
    """Serial time of one Z2 layer: every conditional beamsplitter in sequence, then
    one SNAP and one single-qubit rotation (sites and links run in parallel).

    A conditional beamsplitter is two conditional parities around a beamsplitter.
    This is a coarser count than the ASAP schedule, which overlaps disjoint bonds.
    """
    t_cbs = 2 * durations.cond_parity + durations.beamsplitter
    return 2 * params.n_links * t_cbs + durations.snap + durations.single_qubit


def z2_ansatz_circuit(spec: AnsatzSpec, theta: Sequence[float]) -> Circuit:
    out = Circuit(layout=spec.layout)
    for row in _split(theta, spec):
        out.append(z2_layer(spec.params, row))
    return out


def _u1_hop_local(params: M.U1Params, antihermitian: bool) -> np.ndarray:
    a = annihilation(params.two_s)
    hop = M._kron(a.conj().T, a, M.SIGMA_PLUS, M.SIGMA_MINUS)
    return hop - hop.conj().T if antihermitian else hop + hop.conj().T


def u1_layer(params: M.U1Params, layout: SystemLayout, angles: Sequence[float]) -> Circuit:
    """One layer: even then odd bonds US5(alpha) US4(beta), then US3 and US2 (gamma), then US1 (delta).

    US4(b) = exp(-i b (T + T^dag)) and US5(a) = exp(-a (T - T^dag)) with T the gauge-invariant
    hop of the Hamiltonian; US3(g) = exp(-i g (n_a^2 + n_b^2)), US2(g) = exp(-i g (n_a - n_b)),
    US1(d) = exp(i d Z). The two hopping unitaries act as exact local unitaries on
    (mode a, mode b, qubit i, qubit j); a native split of them only preserves the
    Gauss law to second order in the angle.
    """
    alpha, beta, gamma, delta = angles
    c = Circuit()
    herm = _u1_hop_local(params, False)
    anti = _u1_hop_local(params, True)
    for parity in (0, 1):
        for l in range(parity, params.n_links, 2):
            ma, mb = M.u1_link_modes(l)
            i, j = l, l + 1
            c.append(G.local_unitary([ma, mb], [i, j], expm(-1j * beta * herm), "US4"))
            c.append(G.local_unitary([ma, mb], [i, j], expm(-alpha * anti), "US5"))
    for l in range(params.n_links):
        ma, mb = M.u1_link_modes(l)
        n = np.arange(params.two_s + 1)
        c.append(G.snap(None, ma, list(gamma * n * n)))
        c.append(G.snap(None, mb, list(gamma * n * n)))
        c.append(G.rotation(ma, gamma))
        c.append(G.rotation(mb, -gamma))
    for i in range(params.L):
        c.append(G.qubit_rz(i, -2 * delta))
    return c


def u1_ansatz_circuit(spec: AnsatzSpec, theta: Sequence[float]) -> Circuit:
    out = Circuit(layout=spec.layout)
    for row in _split(theta, spec):
        out.append(u1_layer(spec.params, spec.layout, row))
    return out


def ansatz_circuit(spec: AnsatzSpec, theta: Sequence[float]) -> Circuit:
    if spec.model == "z2":
        return z2_ansatz_circuit(spec, theta)
    return u1_ansatz_circuit(spec, theta)


def prepare(spec: AnsatzSpec, theta: Sequence[float]) -> StateVector:
    psi = spec.initial_state()
    ansatz_circuit(spec, theta).apply(psi)
    return psi


# ----------------------------------------------------------------------------
# objective
# ----------------------------------------------------------------------------

def _shot_energy(spec: AnsatzSpec, state: StateVector, shots: int, rng: np.random.Generator,
                 postselect: bool = False) -> MS.EnergyEstimate:
    if spec.model == "z2":
        return MS.z2_energy(state, spec.params, shots, rng, postselect, spec.gauss_targets)
    return MS.u1_energy(state, spec.params, shots, rng)


def objective(spec: AnsatzSpec, theta: Sequence[float], shots: int | None = None,
              rng: np.random.Generator | None = None, noise: NZ.NoiseModel | None = None,
              n_traj: int = 1, seed: int = 0) -> float:
    """Energy of the ansatz state.

    ``shots=None`` returns the exact expectation. With shots the grouped measurement
    estimators are sampled. With ``noise`` the circuit runs as ``n_traj`` trajectories
    and shots are split evenly across them.
    """
    if noise is None or not noise.enabled:
        psi = prepare(spec, theta)
        if shots is None:
            return spec.energy(psi)
        rng = rng if rng is not None else np.random.default_rng(seed)
        return _shot_energy(spec, psi, shots, rng).mean
    circ = ansatz_circuit(spec, theta)
    psi0 = spec.initial_state()
    vals = []
    for k in range(n_traj):
        res = NZ.trajectory_run(circ, psi0, noise, seed, k)
        if shots is None:
            vals.append(spec.energy(res.state))
        else:
            r = rng if rng is not None else NZ.trajectory_rng(seed + 1, k)
            vals.append(_shot_energy(spec, res.state, max(1, shots // n_traj), r).mean)
    return float(np.mean(vals))


# ----------------------------------------------------------------------------
# optimizers
# ----------------------------------------------------------------------------

@dataclass
class OptimizerConfig:
    """Optimizer settings. SPSA gains a_k = a/(k+A)^alpha, c_k = c/k^gamma (k from 1).

    ``a=None`` calibrates a so that the first step changes no angle by more than
    ``first_step``. Every ``avg_every`` iterations the angles are replaced by the
    mean of the last ``avg_window`` iterates. Shots start at ``shots0`` and grow
    by ``shot_growth`` every ``shot_period`` iterations.
    """

    mode: str = "deterministic"
    max_iter: int = 2000
    seed: int = 0
    restarts: int = 4
    init_scale: float = 0.1
    tol: float = 1e-12
    a: float | None = None
    c: float = 0.1
    A: float = 50.0
    alpha: float = 0.602
    gamma: float = 0.101
    first_step: float = 0.1
    avg_every: int = 15
    avg_window: int = 7
    shots0: int | None = 10
    shot_growth: int = 10
    shot_period: int = 1500
    workers: int = 1
    divergence_factor: float = 10.0

    def __post_init__(self):
        if self.mode not in ("deterministic", "spsa"):
            raise VQEError(f"unknown optimizer mode {self.mode!r}")
        if not (self.avg_every > self.avg_window >= 1) and not (self.avg_every == self.avg_window == 1):
            raise VQEError("averaging needs n > m >= 1 (or n = m = 1 to disable)")
        if self.shots0 is not None and self.shots0 < 1:
            raise VQEError("shots must be >= 1")

    def shots_at(self, k: int) -> int | None:
        if self.shots0 is None:
            return None
        return int(self.shots0 * self.shot_growth ** (k // self.shot_period))


@dataclass
class TraceRow:
    iteration: int
    energy: float
    shots: int | None
    theta: np.ndarray
    exact: float | None = None
    averaged: bool = False


@dataclass
class OptimizationTrace:
    rows: list[TraceRow] = field(default_factory=list)
    theta: np.ndarray | None = None
    energy: float = math.nan
    aborted: bool = False

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "energy", "exact", "shots", "averaged", "theta_hash"])
            for r in self.rows:
                h = hashlib.sha1(np.round(r.theta, 12).tobytes()).hexdigest()[:12]
                w.writerow([r.iteration, repr(r.energy), "" if r.exact is None else repr(r.exact),
                            "" if r.shots is None else r.shots, int(r.averaged), h])

    def theta_json(self) -> str:
        return json.dumps({"theta": [float(x) for x in self.theta], "energy": self.energy})


def _deterministic(spec: AnsatzSpec, cfg: OptimizerConfig, theta0: np.ndarray | None) -> OptimizationTrace:
    rng = np.random.default_rng(cfg.seed)
    trace = OptimizationTrace()
    it = [0]

    def f(th):
        e = objective(spec, th)
        trace.rows.append(TraceRow(it[0], e, None, np.array(th), e))
        it[0] += 1
        return e

    best = None
    for r in range(max(1, cfg.restarts)):
        if r == 0 and theta0 is not None:
            x0 = np.asarray(theta0, float)
        else:
            x0 = rng.normal(0.0, cfg.init_scale, spec.n_angles)
        res = minimize(f, x0, method="L-BFGS-B",
                       options={"maxiter": cfg.max_iter, "ftol": cfg.tol, "gtol": 1e-10, "maxfun": 50 * cfg.max_iter})
        if best is None or res.fun < best.fun:
            best = res
    trace.theta, trace.energy = np.asarray(best.x), float(best.fun)
    return trace


def _spsa(spec: AnsatzSpec, cfg: OptimizerConfig, theta0: np.ndarray | None,
          noise: NZ.NoiseModel | None, track_exact: bool) -> OptimizationTrace:
    master = np.random.SeedSequence(cfg.seed)
    pert_rng = np.random.default_rng(master.spawn(1)[0])
    theta = (np.zeros(spec.n_angles) if theta0 is None else np.asarray(theta0, float)).copy()
    trace = OptimizationTrace()

    def evaluate(th, k, sign):
        rng = np.random.default_rng([cfg.seed, k, sign])
        return objective(spec, th, cfg.shots_at(k), rng, noise, 1, seed=cfg.seed * 1000003 + 2 * k + sign)

    pool = ThreadPoolExecutor(max_workers=2) if cfg.workers > 1 else None

    def pair(th_p, th_m, k, tag=0):
        if pool is None:
            return evaluate(th_p, k, 2 * tag), evaluate(th_m, k, 2 * tag + 1)
        fp = pool.submit(evaluate, th_p, k, 2 * tag)
        fm = pool.submit(evaluate, th_m, k, 2 * tag + 1)
        return fp.result(), fm.result()

    a = cfg.a
    if a is None:
        # calibrate on a few perturbations at the start point
        g_max = 0.0
        for s in range(4):
            d = pert_rng.choice([-1.0, 1.0], spec.n_angles)
            ep, em = pair(theta + cfg.c * d, theta - cfg.c * d, 0, 1 + s)
            g_max = max(g_max, abs(ep - em) / (2 * cfg.c))
        a = cfg.first_step * (1 + cfg.A) ** cfg.alpha / max(g_max, 1e-12)
    e_init = objective(spec, theta, cfg.shots_at(0), np.random.default_rng([cfg.seed, 0, 99]), noise, 1, cfg.seed)
    scale = max(abs(e_init), 1.0)
    history: list[np.ndarray] = []
    try:
        for k in range(1, cfg.max_iter + 1):
            ak = a / (k + cfg.A) ** cfg.alpha
            ck = cfg.c / k ** cfg.gamma
            d = pert_rng.choice([-1.0, 1.0], spec.n_angles)
            ep, em = pair(theta + ck * d, theta - ck * d, k)
            theta = theta - ak * (ep - em) / (2 * ck) * d
            history.append(theta.copy())
            averaged = False
            if cfg.avg_every > 1 and k % cfg.avg_every == 0:
                theta = np.mean(history[-cfg.avg_window:], axis=0)
                averaged = True
            e = 0.5 * (ep + em)
            exact = objective(spec, theta) if track_exact else None
            trace.rows.append(TraceRow(k, e, cfg.shots_at(k), theta.copy(), exact, averaged))
            if e > e_init + cfg.divergence_factor * scale:
                trace.aborted = True
                raise VQEError(f"SPSA diverged at iteration {k}: energy {e:.4g}")
    finally:
        if pool is not None:
            pool.shutdown()
    trace.theta = theta
    trace.energy = objective(spec, theta)
    return trace


def optimize(spec: AnsatzSpec, config: OptimizerConfig | None = None,
             theta0: Sequence[float] | None = None, noise: NZ.NoiseModel | None = None,
             track_exact: bool = True) -> OptimizationTrace:
    """Minimize the ansatz energy; the returned trace ends with the exact final energy."""
    cfg = config or OptimizerConfig()
    th0 = None if theta0 is None else np.asarray(theta0, float)
    if cfg.mode == "deterministic":
        return _deterministic(spec, cfg, th0)
    return _spsa(spec, cfg, th0, noise, track_exact)


def relative_error(spec: AnsatzSpec, energy: float) -> float:
    e0, _ = spec.exact_ground()
    return abs(energy - e0) / abs(e0)


# ----------------------------------------------------------------------------
# Gauss-law post-selection
# ----------------------------------------------------------------------------

@dataclass
class PostselectResult:
    kept_fraction: float
    energy: float
    raw_energy: float
    energy_stderr: float = 0.0
    raw_stderr: float = 0.0


def sector_projector(spec: AnsatzSpec) -> np.ndarray:
    """Diagonal-free projector onto the target Gauss sector (product of eigenprojectors)."""
    def make():
        P = np.eye(spec.layout.dim, dtype=complex)
        for g in spec.gauss:
            if spec.model == "z2":
                P = P @ (np.eye(spec.layout.dim) + g.target * g.op) / 2
            else:
                w, v = np.linalg.eigh(g.op)
                sel = v[:, np.isclose(w, g.target)]
                P = P @ (sel @ sel.conj().T)
        return P
    return spec._get("projector", make)


def gauss_postselect(spec: AnsatzSpec, states: Sequence[StateVector]) -> PostselectResult:
    """State-level post-selection: project each trajectory onto the target sector.

    Energies are averaged with the kept norm as weight; the raw energy is the plain
    trajectory average.
    """
    P = sector_projector(spec)
    H = spec.hamiltonian
    kept, e_post, e_raw = [], [], []
    for s in states:
        v = P @ s.data
        w = float(np.vdot(v, v).real)
        kept.append(w)
        e_raw.append(float(np.vdot(s.data, H @ s.data).real))
        e_post.append(float(np.vdot(v, H @ v).real) / w if w > 1e-300 else 0.0)
    kept, e_post, e_raw = map(np.asarray, (kept, e_post, e_raw))
    W = kept.sum()
    mean_post = float(np.dot(kept, e_post) / W)
    # weighted-mean standard error over trajectories (ratio estimator)
    n = len(states)
    resid = kept * (e_post - mean_post)
    se_post = float(math.sqrt(np.sum(resid ** 2)) / W) if n > 1 else 0.0
    se_raw = float(e_raw.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return PostselectResult(float(kept.mean()), mean_post, float(e_raw.mean()), se_post, se_raw)


def gauss_postselect_shots(spec: AnsatzSpec, states: Sequence[StateVector], shots_per_state: int,
                           rng: np.random.Generator) -> PostselectResult:
    """Shot-level post-selection: discard shots failing per-site or blocked-pair checks."""
    if spec.model != "z2":
        raise VQEError("shot-level Gauss checks are defined for the Z2 groups")
    groups = MS.z2_measurement_groups(spec.params, spec.layout, spec.gauss_targets)
    post, raw, kept = [], [], []
    for s in states:
        est, k = MS.estimate_energy(s, groups, shots_per_state, rng, postselect=True)
        post.append(est.mean)
        kept.append(np.mean(list(k.values())))
        raw.append(MS.estimate_energy(s, groups, shots_per_state, rng)[0].mean)
    post = np.asarray(post)
    good = np.isfinite(post)
    return PostselectResult(float(np.mean(kept)), float(post[good].mean()), float(np.mean(raw)),
                            float(post[good].std(ddof=1) / math.sqrt(good.sum())),
                            float(np.std(raw, ddof=1) / math.sqrt(len(raw))))


# ----------------------------------------------------------------------------
# tau sweep
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class TauRow:
    tau: float
    field_vqe: float
    field_ed: float
    energy_vqe: float
    energy_ed: float


def mean_field(spec_or_params, layout: SystemLayout, state_vec: np.ndarray) -> float:
    """(1/2) sum_l <S^z_l>, the electric-field observable of the sweep."""
    params = spec_or_params.params if isinstance(spec_or_params, AnsatzSpec) else spec_or_params
    tot = 0.0
    for l in range(params.n_links):
        tot += float(np.vdot(state_vec, M.u1_sz(layout, l) @ state_vec).real)
    return 0.5 * tot


def tau_sweep(params: M.U1Params, taus: Sequence[float], layers: int = 4,
              config: OptimizerConfig | None = None, warm_start: bool = True) -> list[TauRow]:
    """VQE and ED electric field across tau, warm-starting each point from its neighbour."""
    from dataclasses import replace
    cfg = config or OptimizerConfig(restarts=1)
    rows = []
    theta = None
    for tau in taus:
        p = replace(params, tau=float(tau))
        spec = AnsatzSpec("u1", layers, p)
        e0, g0 = spec.exact_ground()
        tr = optimize(spec, cfg, theta if warm_start else None)
        theta = tr.theta
        psi = prepare(spec, theta)
        rows.append(TauRow(float(tau), mean_field(p, spec.layout, psi.data),
                           mean_field(p, spec.layout, g0), tr.energy, e0))
    return rows
