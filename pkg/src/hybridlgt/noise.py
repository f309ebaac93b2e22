"""Quantum-trajectory noise during timed circuits, plus closed-form decay analytics.

Times are in seconds and rates in inverse seconds, matching the gate duration
table. The closed-form analytics are unit-free (only products of rate and time
enter).

Qubit noise uses the exact Kraus unraveling, applied interval by interval, of
single-qubit amplitude damping (K0 = diag(1, sqrt(1-p)), K1 = sqrt(p) sigma-)
and pure dephasing (Z jump with probability (1 - e^{-dt/Tphi})/2). Intervals are
subdivided so that no jump probability exceeds ``max_p``. Oscillator decay
(jump operator a) uses the waiting-time method, which is exact for idle modes.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .gates import Circuit
from .hilbert import StateVector


class NoiseError(ValueError):
    """Invalid noise model or a circuit that cannot be timed."""


@dataclass(frozen=True)
class NoiseModel:
    """Per-qubit T1/T2 (s) and optional per-mode loss rate kappa (1/s).

    ``T1`` and ``T2`` may be scalars or per-qubit sequences. ``kappa`` may be a
    scalar or a per-mode sequence; mode loss during circuits is applied only if
    ``mode_decay`` is set. With ``idle`` True (the default) every qubit decoheres
    over the whole scheduled wall-clock time; with ``idle`` False noise acts only
    while a qubit is the target of a gate.
    """

    T1: float | Sequence[float] = 200e-6
    T2: float | Sequence[float] = 200e-6
    kappa: float | Sequence[float] | None = None
    enabled: bool = True
    idle: bool = True
    mode_decay: bool = False
    max_p: float = 0.05

    def __post_init__(self):
        t1 = np.atleast_1d(np.asarray(self.T1, dtype=float))
        t2 = np.atleast_1d(np.asarray(self.T2, dtype=float))
        if np.any(t1 <= 0) or np.any(t2 <= 0):
            raise NoiseError("T1 and T2 must be positive")
        if t1.size > 1 and t2.size > 1 and t1.size != t2.size:
            raise NoiseError("per-qubit T1 and T2 sequences differ in length")
        if np.any(np.broadcast_to(t2, np.broadcast(t1, t2).shape)
                  > 2 * np.broadcast_to(t1, np.broadcast(t1, t2).shape) * (1 + 1e-12)):
            raise NoiseError("T2 must not exceed 2 T1")
        if self.kappa is not None and np.any(np.asarray(self.kappa, dtype=float) < 0):
            raise NoiseError("kappa must be non-negative")
        if not 0 < self.max_p < 1:
            raise NoiseError("max_p must lie in (0, 1)")

    @staticmethod
    def _pick(val, i: int) -> float:
        arr = np.atleast_1d(np.asarray(val, dtype=float))
        return float(arr[i] if arr.size > 1 else arr[0])

    def t1(self, q: int) -> float:
        return self._pick(self.T1, q)

    def t2(self, q: int) -> float:
        return self._pick(self.T2, q)

    def tphi(self, q: int) -> float:
        """Pure dephasing time (1/T2 - 1/(2 T1))^-1; infinite at T2 = 2 T1."""
        rate = 1.0 / self.t2(q) - 0.5 / self.t1(q)
        return math.inf if rate <= 1e-15 else 1.0 / rate

    def mode_kappa(self, m: int) -> float:
        return 0.0 if self.kappa is None else self._pick(self.kappa, m)


NOISELESS = NoiseModel(enabled=False)


@dataclass(frozen=True)
class JumpEvent:
    trajectory_id: int
    time: float
    qubit: int
    kind: str  # "decay", "dephase" (qubit index) or "mode_decay" (mode index)


@dataclass
class TrajectoryResult:
    state: StateVector
    jumps: list[JumpEvent] = field(default_factory=list)
    trajectory_id: int = 0
    total_time: float = 0.0

    @property
    def error_free(self) -> bool:
        return not self.jumps


def jumps_to_json(results: Sequence[TrajectoryResult] | Sequence[JumpEvent]) -> str:
    events: list[JumpEvent] = []
    for r in results:
        events.extend(r.jumps if isinstance(r, TrajectoryResult) else [r])
    return json.dumps([asdict(e) for e in events])


def trajectory_rng(master_seed: int, index: int) -> np.random.Generator:
    """Per-trajectory generator derived from (master seed, trajectory index)."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), int(index)]))


# ----------------------------------------------------------------------------
# elementary noisy intervals
# ----------------------------------------------------------------------------

def _qubit_view(state: StateVector, q: int) -> np.ndarray:
    lay = state.layout
    ax = lay.qubit_axis(q)
    pre = int(np.prod(lay.dims[:ax], dtype=np.int64))
    return state.data.reshape(pre, 2, -1)


def _renormalize(state: StateVector) -> None:
    state.data /= np.linalg.norm(state.data)


def qubit_interval(state: StateVector, q: int, dt: float, model: NoiseModel,
                   rng: np.random.Generator, t0: float = 0.0,
                   log: list | None = None, tid: int = 0) -> None:
    """Apply amplitude damping and dephasing to qubit ``q`` for duration ``dt``."""
    if dt <= 0 or not model.enabled:
        return
    T1, Tphi = model.t1(q), model.tphi(q)
    p_all = -math.expm1(-dt / T1)
    z_all = 0.0 if math.isinf(Tphi) else -math.expm1(-dt / Tphi) / 2
    n = max(1, math.ceil(max(p_all, z_all) / model.max_p))
    h = dt / n
    p = -math.expm1(-h / T1)
    pz = 0.0 if math.isinf(Tphi) else -math.expm1(-h / Tphi) / 2
    keep = math.sqrt(1.0 - p)
    for k in range(n):
        v = _qubit_view(state, q)
        p1 = float(np.vdot(v[:, 1, :], v[:, 1, :]).real)
        t = t0 + (k + 0.5) * h
        if p1 == 0.0:
            if pz == 0.0:
                break  # nothing left to decay and no dephasing: remaining steps are identity
        elif rng.random() < p * p1:
            v[:, 0, :] = v[:, 1, :]
            v[:, 1, :] = 0.0
            _renormalize(state)
            if log is not None:
                log.append(JumpEvent(tid, t, q, "decay"))
        else:
            v[:, 1, :] *= keep
            _renormalize(state)
        if pz > 0 and rng.random() < pz:
            v = _qubit_view(state, q)
            v[:, 1, :] *= -1.0
            if log is not None:
                log.append(JumpEvent(tid, t, q, "dephase"))


def _mode_view(state: StateVector, m: int) -> np.ndarray:
    lay = state.layout
    ax = lay.mode_axis(m)
    pre = int(np.prod(lay.dims[:ax], dtype=np.int64))
    return state.data.reshape(pre, lay.dims[ax], -1)


def mode_interval(state: StateVector, m: int, kappa: float, dt: float,
                  rng: np.random.Generator, t0: float = 0.0,
                  log: list | None = None, tid: int = 0) -> None:
    """Exact waiting-time unraveling of loss ``a`` at rate ``kappa`` on mode ``m``."""
    if dt <= 0 or kappa <= 0:
        return
    n_levels = state.layout.dims[state.layout.mode_axis(m)]
    levels = np.arange(n_levels, dtype=float)
    sqrt_n = np.sqrt(levels[1:])
    t, remaining = t0, dt
    while remaining > 0:
        v = _mode_view(state, m)
        pops = np.einsum("anb,anb->n", v.conj(), v).real

        def surv(tau, pops=pops):
            return float(np.dot(pops, np.exp(-kappa * levels * tau)))

        r = rng.random()
        if surv(remaining) >= r:
            v *= np.exp(-0.5 * kappa * levels * remaining)[None, :, None]
            _renormalize(state)
            return
        tau = brentq(lambda x: surv(x) - r, 0.0, remaining, xtol=1e-14)
        v *= np.exp(-0.5 * kappa * levels * tau)[None, :, None]
        v[:, :-1, :] = v[:, 1:, :] * sqrt_n[None, :, None]
        v[:, -1, :] = 0.0
        _renormalize(state)
        t += tau
        remaining -= tau
        if log is not None:
            log.append(JumpEvent(tid, t, m, "mode_decay"))


# ----------------------------------------------------------------------------
# timed circuits
# ----------------------------------------------------------------------------

def trajectory_run(circuit: Circuit, state: StateVector, noise: NoiseModel, seed: int = 0,
                   trajectory_id: int = 0, total_time: float | None = None,
                   rng: np.random.Generator | None = None) -> TrajectoryResult:
    """One Monte-Carlo wavefunction run of ``circuit`` on a copy of ``state``.

    Gates follow the as-soon-as-possible schedule. Before each gate its qubits
    accumulate noise over the gate's duration (and, with ``noise.idle``, over the
    gap since their previous gate); the gate unitary then acts instantaneously at
    the interval end. With ``noise.idle`` every qubit is finally advanced to the
    circuit's end. An explicit ``total_time`` adds a trailing idle window for all
    qubits from their last gate (or from the circuit end without ``idle``).
    """
    lay = state.layout
    ops = list(circuit.ops)
    if noise.enabled and ops and total_time is None and all(op.duration == 0 for op in ops):
        raise NoiseError("circuit instructions carry no durations; use with_durations()")
    rng = rng if rng is not None else trajectory_rng(seed, trajectory_id)
    psi = state.copy()
    log: list[JumpEvent] = []
    sched = circuit.schedule()
    t_end = max([e for _, e in sched] + [total_time or 0.0])
    if not noise.enabled:
        circuit.apply(psi, rng)
        return TrajectoryResult(psi, log, trajectory_id, t_end)

    qclock = [0.0] * lay.n_qubits
    mclock = [0.0] * lay.n_modes
    mode_on = noise.mode_decay and noise.kappa is not None

    def advance_qubit(q, start, stop):
        qubit_interval(psi, q, stop - start, noise, rng, start, log, trajectory_id)

    def advance_mode(m, start, stop):
        mode_interval(psi, m, noise.mode_kappa(m), stop - start, rng, start, log, trajectory_id)

    for op, (start, stop) in zip(ops, sched):
        for q in op.qubits:
            begin = qclock[q] if noise.idle else start
            advance_qubit(q, begin, stop)
            qclock[q] = stop
        if mode_on:
            for m in op.modes:
                begin = mclock[m] if noise.idle else start
                advance_mode(m, begin, stop)
                mclock[m] = stop
        Circuit([op]).apply(psi, rng)
    if noise.idle or total_time is not None:
        depth = max([e for _, e in sched], default=0.0)
        for q in range(lay.n_qubits):
            advance_qubit(q, qclock[q] if noise.idle else depth, t_end)
        if mode_on:
            for m in range(lay.n_modes):
                advance_mode(m, mclock[m] if noise.idle else depth, t_end)
    return TrajectoryResult(psi, log, trajectory_id, t_end)


def _run_chunk(args):
    circuit, state, noise, seed, ids, total_time, observe = args
    out = []
    for i in ids:
        res = trajectory_run(circuit, state, noise, seed, i, total_time)
        if observe is not None:
            res = (i, res.jumps, observe(res.state))
        out.append(res)
    return out


def run_trajectories(circuit: Circuit, state: StateVector, noise: NoiseModel, n: int,
                     seed: int = 0, workers: int = 1, total_time: float | None = None,
                     observe: Callable[[StateVector], object] | None = None) -> list:
    """Run ``n`` trajectories; results are independent of ``workers``.

    Without ``observe`` the full TrajectoryResult list is returned. With it, each
    entry is (trajectory_id, jumps, observe(final_state)); ``observe`` must be
    picklable when ``workers`` > 1.
    """
    ids = list(range(n))
    if workers <= 1 or n < 2:
        return _run_chunk((circuit, state, noise, seed, ids, total_time, observe))
    chunks = [ids[k::workers] for k in range(workers)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_run_chunk, [(circuit, state, noise, seed, c, total_time, observe)
                                           for c in chunks if c]))
    flat = [r for part in parts for r in part]
    key = (lambda r: r.trajectory_id) if observe is None else (lambda r: r[0])
    return sorted(flat, key=key)


def error_free_fraction(results: Sequence) -> tuple[float, float]:
    """Fraction of jump-free trajectories with its binomial standard error."""
    flags = [not (r.jumps if isinstance(r, TrajectoryResult) else r[1]) for r in results]
    f = float(np.mean(flags))
    return f, math.sqrt(max(f * (1 - f), 1e-300) / len(flags))


def mode_decay_trajectory(state: StateVector, mode: int, kappa: float, t: float,
                          seed: int = 0, trajectory_id: int = 0) -> TrajectoryResult:
    """Idle loss on one mode for time ``t`` (exact waiting-time unraveling)."""
    if kappa < 0 or t < 0:
        raise NoiseError("kappa and t must be non-negative")
    rng = trajectory_rng(seed, trajectory_id)
    psi = state.copy()
    log: list[JumpEvent] = []
    mode_interval(psi, mode, kappa, t, rng, 0.0, log, trajectory_id)
    return TrajectoryResult(psi, log, trajectory_id, t)


# ----------------------------------------------------------------------------
# closed-form analytics
# ----------------------------------------------------------------------------

def analytic_mode_n(n0: float, kappa: float, t: float) -> float:
    return n0 * math.exp(-kappa * t)


def analytic_mode_nsq(n0: float, nsq0: float, kappa: float, t: float) -> float:
    """<n^2(t)> of an oscillator under loss a at rate kappa."""
    return (nsq0 - n0) * math.exp(-2 * kappa * t) + n0 * math.exp(-kappa * t)


def binary_digits(N: int, n_qubits: int | None = None) -> list[int]:
    nq = max(1, int(N).bit_length()) if n_qubits is None else n_qubits
    if N >= 2 ** nq:
        raise NoiseError(f"{N} does not fit in {nq} qubits")
    return [(N >> i) & 1 for i in range(nq)]


def analytic_fock_binary_nsq(N: int, gamma: float, t: float) -> float:
    """<n^2(t)> for Fock state N stored in binary on qubits, each decaying at gamma."""
    bits = binary_digits(N)
    diag = sum(4 ** i * b for i, b in enumerate(bits))
    return (N * N - diag) * math.exp(-2 * gamma * t) + diag * math.exp(-gamma * t)


def fock_binary_short_time_rate(N: int, gamma: float = 1.0) -> float:
    """-d ln<n^2>/dt at t = 0 for the binary encoding: (2 - D/N^2) gamma.

    D = sum_i 4^i b_i; for N = 2^k - 1 this tends to (5/3) gamma as k grows.
    """
    if N < 1:
        raise NoiseError("N must be >= 1")
    diag = sum(4 ** i * b for i, b in enumerate(binary_digits(N)))
    return (2 * (N * N - diag) + diag) / (N * N) * gamma


def oscillator_short_time_rate(N: int, kappa: float = 1.0) -> float:
    """-d ln<n^2>/dt at t = 0 for Fock N under single-mode loss: (2 - 1/N) kappa."""
    if N < 1:
        raise NoiseError("N must be >= 1")
    return (2 - 1 / N) * kappa


def _one_over_e_time(f: Callable[[float], float], f0: float, rate: float) -> float:
    target = f0 / math.e
    hi = 1.0 / rate
    while f(hi) > target:
        hi *= 2
    return brentq(lambda x: f(x) - target, 0.0, hi, xtol=1e-13)


def oscillator_decay_time(N: int, kappa: float = 1.0) -> float:
    """1/e time of <n^2> for Fock |N> under mode loss."""
    if N <= 0:
        return math.inf
    return _one_over_e_time(lambda t: analytic_mode_nsq(N, N * N, kappa, t), N * N, kappa)


def fock_binary_decay_time(N: int, gamma: float = 1.0) -> float:
    """1/e time of <n^2> for Fock N in the qubit binary encoding."""
    if N <= 0:
        return math.inf
    return _one_over_e_time(lambda t: analytic_fock_binary_nsq(N, gamma, t), N * N, gamma)


@dataclass(frozen=True)
class DecayTimeRow:
    N: int
    oscillator: float
    fock_binary: float


def effective_decay_time_scan(N_values: Sequence[int], kappa: float = 1.0,
                              gamma: float = 1.0) -> list[DecayTimeRow]:
    """Effective 1/e decay time of <n^2> against N for both encodings."""
    return [DecayTimeRow(int(N), oscillator_decay_time(N, kappa), fock_binary_decay_time(N, gamma))
            for N in N_values]


def _crossing_from_curve(times: np.ndarray, curve: np.ndarray, target: float) -> float:
    idx = int(np.argmax(curve <= target))
    if curve[idx] > target:
        raise NoiseError("curve never crosses 1/e on the sampled window")
    if idx == 0:
        return float(times[0])
    t0, t1, c0, c1 = times[idx - 1], times[idx], curve[idx - 1], curve[idx]
    return float(t0 + (c0 - target) * (t1 - t0) / (c0 - c1))


def trajectory_number_curves(N: int, encoding: str, rate: float = 1.0, n_traj: int = 4000,
                             seed: int = 0, t_max: float | None = None, grid: int = 2001,
                             max_p: float = 0.01) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Trajectory averages (times, <n(t)>, <n^2(t)>) reconstructed from jump logs.

    ``encoding`` is "oscillator" (one mode with loss) or "fock_binary" (one qubit
    per binary digit with T1 = 1/rate and no pure dephasing). Qubit jump times
    are resolved to the subinterval set by ``max_p``.
    """
    from .hilbert import basis_state, new_layout

    t_max = t_max if t_max is not None else 3.0 / rate
    times = np.linspace(0.0, t_max, grid)
    acc1 = np.zeros_like(times)
    acc2 = np.zeros_like(times)
    if encoding == "oscillator":
        lay = new_layout([N], 0)
        psi = basis_state(lay, [N])
        for i in range(n_traj):
            res = mode_decay_trajectory(psi, 0, rate, t_max, seed, i)
            jt = np.array([e.time for e in res.jumps])
            n_t = (N - np.searchsorted(np.sort(jt), times, side="right")).astype(float)
            acc1 += n_t
            acc2 += n_t ** 2
    elif encoding == "fock_binary":
        bits = binary_digits(N)
        lay = new_layout([], len(bits))
        psi = basis_state(lay, [], bits)
        model = NoiseModel(T1=1.0 / rate, T2=2.0 / rate, max_p=max_p)
        for i in range(n_traj):
            res = trajectory_run(Circuit([]), psi, model, seed, i, total_time=t_max)
            off = {e.qubit: e.time for e in res.jumps if e.kind == "decay"}
            n_t = np.zeros_like(times)
            for q, b in enumerate(bits):
                if b:
                    alive = times < off[q] if q in off else np.ones_like(times, dtype=bool)
                    n_t += (2 ** q) * alive
            acc1 += n_t
            acc2 += n_t ** 2
    else:
        raise NoiseError(f"unknown encoding {encoding!r}")
    return times, acc1 / n_traj, acc2 / n_traj


def trajectory_decay_time(N: int, encoding: str, rate: float = 1.0, n_traj: int = 4000,
                          seed: int = 0, t_max: float | None = None,
                          grid: int = 2001, max_p: float = 0.01) -> float:
    """Trajectory estimate of the <n^2> 1/e time."""
    times, _, nsq = trajectory_number_curves(N, encoding, rate, n_traj, seed, t_max, grid, max_p)
    return _crossing_from_curve(times, nsq, N * N / math.e)
