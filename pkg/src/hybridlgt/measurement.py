"""Measurement protocols: binary Fock readout, beamsplitter-basis hopping, grouped
energy estimators, the string order correlator, stiffness, and an observable suite.

Sampling model: a measurement circuit rotates a copy of the state into the
computational basis and ``shots`` outcomes are drawn from the Born distribution.
Mid-circuit measurement with collapse and reset is simulated explicitly only in
:func:`binary_fock_readout`; the grouped estimators read every subsystem at the
end, so drawing full-basis samples is equivalent and much faster.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import composite as C
from . import gates as G
from . import models as M
from .gates import Circuit
from .hilbert import (
    PAULI,
    StateVector,
    SystemLayout,
    annihilation,
    embed_local,
    new_layout,
    number,
)


# ----------------------------------------------------------------------------
# records
# ----------------------------------------------------------------------------

@dataclass
class ShotRecord:
    """Per-shot labels: columns are mode occupations then qubit bits, in layout order."""

    outcomes: np.ndarray
    circuit_id: str
    seed: int | None = None

    @property
    def shots(self) -> int:
        return int(self.outcomes.shape[0])

    def write_csv(self, path, layout: SystemLayout) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["shot_id", "circuit_id"]
                       + [f"n{m}" for m in range(layout.n_modes)]
                       + [f"b{q}" for q in range(layout.n_qubits)])
            for k, row in enumerate(self.outcomes):
                w.writerow([k, self.circuit_id] + [int(x) for x in row])


@dataclass
class EnergyEstimate:
    mean: float
    stderr: float
    shots: int
    groups: dict[str, tuple[float, float]] = field(default_factory=dict)


def sample_basis(state: StateVector, shots: int, rng: np.random.Generator, circuit_id: str = "") -> ShotRecord:
    """Draw computational-basis labels from |ψ|²."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    p = state.probabilities()
    p = p / p.sum()
    idx = rng.choice(p.size, size=shots, p=p)
    labels = np.stack(np.unravel_index(idx, state.layout.dims), axis=1)
    return ShotRecord(labels, circuit_id)


def basis_expectation(state: StateVector, values: Callable[[np.ndarray], np.ndarray]) -> float:
    """Σ_k |ψ_k|² f(label_k) over the full basis (the infinite-shot limit)."""
    table = state.layout.occupation_table()
    return float(np.dot(state.probabilities(), values(table)))


def _z_from_bit(b):
    return 1 - 2 * np.asarray(b)


# ----------------------------------------------------------------------------
# binary Fock readout
# ----------------------------------------------------------------------------

def binary_fock_readout(state: StateVector, mode: int, qubit: int,
                        rng: np.random.Generator) -> tuple[int, StateVector]:
    """Read n bit by bit: SQR(π⃗_k) flips the qubit iff bit k of n is 1, then measure + reset.

    The qubit must start in |0>.  Returns the decoded occupation and the collapsed state.
    """
    nmax = state.layout.cutoffs[mode]
    t = state.tensor()
    if np.sum(np.abs(np.take(t, 1, axis=state.layout.qubit_axis(qubit))) ** 2) > 1e-12:
        raise ValueError("readout qubit must be in |0>")
    n = 0
    for k in range(C.n_stages(nmax)):
        Circuit([G.sqr(qubit, mode, C.superparity_angles(nmax, k))]).apply(state)
        bit = G.measure_qubit(state, qubit, rng, reset=True)
        n |= bit << k
    return n, state


# ----------------------------------------------------------------------------
# beamsplitter-basis hopping measurement
# ----------------------------------------------------------------------------

def hopping_basis_change(i: int, j: int, phi: float = 0.0) -> Circuit:
    """BS(φ + π/2, π/4): afterwards n_i − n_j reads e^{iφ} a_i† a_j + h.c."""
    return Circuit([G.beamsplitter(i, j, phi + math.pi / 2, math.pi / 4)])


def hopping_expectation_bs(state: StateVector, i: int, j: int, shots: int | None,
                           rng: np.random.Generator | None = None, phi: float = 0.0) -> tuple[float, float]:
    """(estimate, standard error) of ⟨e^{iφ} a_i† a_j + h.c.⟩; ``shots=None`` is exact."""
    rot = state.copy()
    hopping_basis_change(i, j, phi).apply(rot)
    f = lambda lab: lab[:, i] - lab[:, j]
    if shots is None:
        return basis_expectation(rot, f), 0.0
    vals = f(sample_basis(rot, shots, rng).outcomes).astype(float)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(shots)) if shots > 1 else 0.0


# ----------------------------------------------------------------------------
# grouped energy estimators
# ----------------------------------------------------------------------------

@dataclass
class MeasurementGroup:
    """A basis-change circuit plus a per-shot estimator and optional per-shot Gauss checks."""

    name: str
    kind: str
    circuit: Circuit
    estimator: Callable[[np.ndarray], np.ndarray]
    gauss_ok: Callable[[np.ndarray], np.ndarray] | None = None


def z2_measurement_groups(params: M.Z2Params, layout: SystemLayout,
                          gauss_targets: Sequence[int] | None = None) -> list[MeasurementGroup]:
    """Field+onsite (every link in X and every site in Fock) and one group per bond parity.

    In a hopping group, bond links read Z (correlated with n_i − n_j after the
    beamsplitter) and the remaining links read X, so every shot can still check
    Gauss's law on each untouched site and on each blocked pair G_i G_j.
    ``gauss_targets`` holds the expected G_i eigenvalues (default all +1).
    """
    L, nl = params.L, params.n_links
    tgt = [1] * L if gauss_targets is None else [int(round(x)) for x in gauss_targets]
    bonds = M.z2_bonds(params)
    qcol = lambda l: layout.n_modes + l

    def x_frame(links):
        c = Circuit()
        for l in links:
            c.append(C.hadamard_like(l).inverse())
        return c

    def site_links(i):
        return [l for (a, b, l) in bonds if i in (a, b)]

    def gauss_all(lab, blocked: Sequence[tuple[int, int, int]] = ()):
        ok = np.ones(lab.shape[0], bool)
        in_pair = {x for (a, b, _) in blocked for x in (a, b)}
        bond_links = {l for (_, _, l) in blocked}
        for i in range(L):
            if i in in_pair:
                continue
            val = (-1) ** lab[:, i]
            for l in site_links(i):
                val = val * _z_from_bit(lab[:, qcol(l)])
            ok &= val == tgt[i]
        for (a, b, l) in blocked:
            val = (-1) ** (lab[:, a] + lab[:, b])
            for ll in set(site_links(a) + site_links(b)) - bond_links:
                val = val * _z_from_bit(lab[:, qcol(ll)])
            ok &= val == tgt[a] * tgt[b]
        return ok

    def field_est(lab):
        e = np.zeros(lab.shape[0])
        for l in range(nl):
            e -= params.g * _z_from_bit(lab[:, qcol(l)])
        for i in range(L):
            e += params.U * lab[:, i] ** 2
        return e

    groups = [MeasurementGroup("field+onsite", "field", x_frame(range(nl)), field_est,
                               lambda lab: gauss_all(lab))]
    parities = [("even", [b for b in bonds if b[0] % 2 == 0 and b[2] < L - 1]),
                ("odd", [b for b in bonds if b[0] % 2 == 1 and b[2] < L - 1])]
    if params.twist is not None:
        parities.append(("twist", [b for b in bonds if b[2] == L - 1]))
    for name, sel in parities:
        if not sel:
            continue
        used = {l for (_, _, l) in sel}
        circ = x_frame([l for l in range(nl) if l not in used])
        for (i, j, l) in sel:
            phi = params.twist if (params.twist is not None and l == L - 1) else 0.0
            circ.append(hopping_basis_change(i, j, phi))

        def est(lab, sel=sel):
            e = np.zeros(lab.shape[0])
            for (i, j, l) in sel:
                e -= params.J * _z_from_bit(lab[:, qcol(l)]) * (lab[:, i] - lab[:, j])
            return e

        groups.append(MeasurementGroup(f"hop-{name}", "hopping", circ, est,
                                       lambda lab, sel=sel: gauss_all(lab, sel)))
    return groups


def u1_measurement_groups(params: M.U1Params, layout: SystemLayout) -> list[MeasurementGroup]:
    """Field (Fock + Z) and eight hopping circuits: {even, odd} × {XX, YY, XY, YX}."""
    k = params.tau / (2 * math.pi)
    c = params.g ** 2 / 2
    hopc = params.J / (2 * params.S)
    qcol = lambda q: layout.n_modes + q

    def field_est(lab):
        e = np.full(lab.shape[0], params.n_links * c * (k * k - params.S ** 2))
        for l in range(params.n_links):
            ma, mb = M.u1_link_modes(l)
            na, nb = lab[:, ma], lab[:, mb]
            e += c * ((na ** 2 + nb ** 2) / 2 - k * (na - nb))
        for i in range(params.L):
            e += params.M * (-1) ** i * lab[:, qcol(i)]
        return e

    groups = [MeasurementGroup("field", "field", Circuit(), field_est)]
    # (P_i, P_j, boson phase φ, sign) with σ⁺σ⁻B + h.c. = ¼ Σ sign P_i P_j (e^{iφ} a†b + h.c.)
    combos = [("X", "X", 0.0, 1.0), ("Y", "Y", 0.0, 1.0),
              ("X", "Y", math.pi / 2, 1.0), ("Y", "X", math.pi / 2, -1.0)]
    for parity in (0, 1):
        links = list(range(parity, params.n_links, 2))
        if not links:
            continue
        for (pi, pj, phi, sgn) in combos:
            circ = Circuit()
            for l in links:
                circ.append(C.pauli_frame(l, pi).inverse())
                circ.append(C.pauli_frame(l + 1, pj).inverse())
                ma, mb = M.u1_link_modes(l)
                circ.append(hopping_basis_change(ma, mb, phi))

            def est(lab, links=links, sgn=sgn):
                e = np.zeros(lab.shape[0])
                for l in links:
                    ma, mb = M.u1_link_modes(l)
                    zz = _z_from_bit(lab[:, qcol(l)]) * _z_from_bit(lab[:, qcol(l + 1)])
                    e += hopc * sgn / 4 * zz * (lab[:, ma] - lab[:, mb])
                return e

            groups.append(MeasurementGroup(f"hop-{'eo'[parity]}-{pi}{pj}", "hopping", circ, est))
    return groups


def estimate_energy(state: StateVector, groups: Sequence[MeasurementGroup], shots: int | None,
                    rng: np.random.Generator | None = None, postselect: bool = False
                    ) -> tuple[EnergyEstimate, dict[str, float]]:
    """Sum of group means; ``shots=None`` gives the exact value.  Also returns kept fractions."""
    total, var, kept = 0.0, 0.0, {}
    by_kind: dict[str, list[float]] = {}
    used = 0
    for grp in groups:
        rot = state.copy()
        grp.circuit.apply(rot)
        if shots is None:
            if postselect and grp.gauss_ok is not None:
                lab = rot.layout.occupation_table()
                p = rot.probabilities()
                mask = grp.gauss_ok(lab)
                pk = p[mask].sum()
                mean = float(np.dot(p[mask], grp.estimator(lab[mask])) / pk) if pk > 0 else float("nan")
                kept[grp.name] = float(pk)
            else:
                mean = basis_expectation(rot, grp.estimator)
                kept[grp.name] = 1.0
            v = 0.0
        else:
            lab = sample_basis(rot, shots, rng, grp.name).outcomes
            if postselect and grp.gauss_ok is not None:
                mask = grp.gauss_ok(lab)
                kept[grp.name] = float(mask.mean())
                lab = lab[mask]
            else:
                kept[grp.name] = 1.0
            vals = grp.estimator(lab).astype(float)
            n = vals.size
            used += shots
            mean = float(vals.mean()) if n else float("nan")
            v = float(vals.var(ddof=1) / n) if n > 1 else 0.0
        total += mean
        var += v
        by_kind.setdefault(grp.kind, [0.0, 0.0])
        by_kind[grp.kind][0] += mean
        by_kind[grp.kind][1] += v
    breakdown = {k: (m, math.sqrt(v)) for k, (m, v) in by_kind.items()}
    return EnergyEstimate(total, math.sqrt(var), used, breakdown), kept


def z2_energy(state: StateVector, params: M.Z2Params, shots: int | None,
              rng: np.random.Generator | None = None, postselect: bool = False,
              gauss_targets: Sequence[int] | None = None) -> EnergyEstimate:
    groups = z2_measurement_groups(params, state.layout, gauss_targets)
    return estimate_energy(state, groups, shots, rng, postselect)[0]


def u1_energy(state: StateVector, params: M.U1Params, shots: int | None,
              rng: np.random.Generator | None = None) -> EnergyEstimate:
    return estimate_energy(state, u1_measurement_groups(params, state.layout), shots, rng)[0]


# ----------------------------------------------------------------------------
# string order correlator
# ----------------------------------------------------------------------------

def pad_state(state: StateVector, extra_levels: int, extra_qubits: int) -> StateVector:
    """Embed into a layout with ``extra_levels`` more Fock levels per mode and fresh |0> qubits."""
    lay = state.layout
    new = new_layout([c + extra_levels for c in lay.cutoffs], lay.n_qubits + extra_qubits)
    t = np.zeros(new.dims, complex)
    sl = tuple(slice(0, d) for d in lay.dims) + (0,) * extra_qubits
    t[sl] = state.tensor()
    return StateVector(new, t.reshape(-1))


def hadamard_test_frames(anc: int) -> tuple[Circuit, Circuit]:
    """(prep, readout) so that after CD(iθ) the ancilla Z reads ⟨sin(2θ x)⟩.

    prep takes |0> to |+>; readout maps −Y to Z, because CD(iθ) = exp(iθ x Z) on |+>
    leaves ⟨Y⟩ = −⟨sin(2θx)⟩.
    """
    prep = Circuit([G.qubit_ry(anc, math.pi / 2)])
    readout = Circuit([G.qubit_rx(anc, -math.pi / 2)])
    return prep, readout


def string_order_circuits(state: StateVector, i: int, j: int, theta: float, link_qubits: Sequence[int],
                          pad: int = 4) -> tuple[list[StateVector], Callable[[np.ndarray], np.ndarray]]:
    """Rotated states for the x- and p-parts and the per-shot product Z_anc,i Z… Z_anc,j."""
    if theta == 0:
        raise ValueError("string order estimator needs theta != 0")
    big = pad_state(state, pad, 2)
    ai, aj = big.layout.n_qubits - 2, big.layout.n_qubits - 1
    out = []
    for alpha in (1j * theta, theta):
        st = big.copy()
        pi_, ri = hadamard_test_frames(ai)
        pj_, rj = hadamard_test_frames(aj)
        (pi_ + pj_ + Circuit([G.cond_displacement(ai, i, alpha), G.cond_displacement(aj, j, alpha)])
         + ri + rj).apply(st)
        out.append(st)
    nm = big.layout.n_modes
    cols = [nm + ai, nm + aj] + [nm + q for q in link_qubits]

    def prod(lab):
        v = np.ones(lab.shape[0])
        for c in cols:
            v = v * _z_from_bit(lab[:, c])
        return v
    return out, prod


def string_order(state: StateVector, i: int, j: int, theta: float, link_qubits: Sequence[int],
                 shots: int | None = None, rng: np.random.Generator | None = None,
                 pad: int = 4) -> tuple[float, float]:
    """(1/8θ²)(⟨Z_a Z… Z_a⟩_{α=iθ} + ⟨Z_a Z… Z_a⟩_{α=θ}) ≈ ⟨a_i† Z…Z a_j + h.c.⟩."""
    states, prod = string_order_circuits(state, i, j, theta, link_qubits, pad)
    means, var = [], 0.0
    for st in states:
        if shots is None:
            means.append(basis_expectation(st, prod))
        else:
            v = prod(sample_basis(st, shots, rng).outcomes)
            means.append(float(v.mean()))
            var += float(v.var(ddof=1)) / shots
    scale = 1 / (8 * theta * theta)
    return scale * sum(means), scale * math.sqrt(var)


def string_operator(layout: SystemLayout, i: int, j: int, link_qubits: Sequence[int]) -> np.ndarray:
    """Dense a_i† Z…Z a_j + h.c."""
    ai = embed_local(layout, annihilation(layout.cutoffs[i]), [i])
    aj = embed_local(layout, annihilation(layout.cutoffs[j]), [j])
    Zs = np.eye(layout.dim, dtype=complex)
    for q in link_qubits:
        Zs = Zs @ embed_local(layout, PAULI["Z"], [layout.qubit_axis(q)])
    O = ai.conj().T @ Zs @ aj
    return O + O.conj().T


# ----------------------------------------------------------------------------
# stiffness
# ----------------------------------------------------------------------------

def twisted_ground_energy(params: M.Z2Params, phi: float) -> float:
    """Lowest energy in the all-(+1) Gauss sector at fixed boson number, twist φ."""
    p = M.Z2Params(params.L, params.g, params.U, params.J, params.B, params.matter,
                   params.N, params.cutoff, twist=phi)
    lay, _, H = M.build_z2_1d(p)
    B = M.sector_basis(lay, M.gauss_ops_z2(lay, p), number_op=M.z2_total_number(lay, p),
                       n_total=p.n_bosons)
    w, _ = M.sector_ground(H, B, 1)
    return float(w[0])


def stiffness(params: M.Z2Params, h: float = 0.05,
              energy: Callable[[float], float] | None = None) -> float:
    """ρ_s = (L/J) E''(0) by the 5-point central difference on the grid {0, ±h, ±2h}."""
    if params.J == 0:
        return 0.0
    E = energy or (lambda phi: twisted_ground_energy(params, phi))
    e = {k: E(k * h) for k in (-2, -1, 0, 1, 2)}
    d2 = (-e[2] + 16 * e[1] - 30 * e[0] + 16 * e[-1] - e[-2]) / (12 * h * h)
    return params.L / params.J * d2


# ----------------------------------------------------------------------------
# observable suite
# ----------------------------------------------------------------------------

@dataclass
class Observables:
    parity: float
    clump: float
    fluctuations: float
    pair_hopping: float
    string_order: float
    per_site: dict[str, np.ndarray]


def observable_suite(state: StateVector, n_sites: int | None = None) -> Observables:
    """Site averages of parity, clump n(n−1)(n−2)(n−3), ⟨n⟩² − ⟨n²⟩, pair hopping
    ⟨a_0†² a_i² + h.c.⟩, and the string correlator ⟨a_0† Z_0…Z_{i−1} a_i + h.c.⟩.

    Assumes the Z2 boson layout (sites = modes, link l between sites l and l+1).
    """
    lay = state.layout
    L = n_sites or lay.n_modes
    psi = state.data
    par, clump, fl, pair, so = (np.zeros(L) for _ in range(5))
    for i in range(L):
        pops = state.mode_populations(i)
        n = np.arange(pops.size)
        par[i] = np.dot(pops, (-1.0) ** n)
        clump[i] = np.dot(pops, n * (n - 1) * (n - 2) * (n - 3))
        fl[i] = np.dot(pops, n) ** 2 - np.dot(pops, n * n)
    a0 = embed_local(lay, annihilation(lay.cutoffs[0]), [0])
    for i in range(L):
        ai = embed_local(lay, annihilation(lay.cutoffs[i]), [i])
        P = a0.conj().T @ a0.conj().T @ ai @ ai
        pair[i] = np.real(np.vdot(psi, (P + P.conj().T) @ psi))
        so[i] = np.real(np.vdot(psi, string_operator(lay, 0, i, list(range(i))) @ psi))
    per = dict(parity=par, clump=clump, fluctuations=fl, pair_hopping=pair, string_order=so)
    return Observables(par.mean(), clump.mean(), fl.mean(), pair.mean(), so.mean(), per)
