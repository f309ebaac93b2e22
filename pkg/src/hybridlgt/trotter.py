"""Product-formula circuits, the eight-mode commutator plaquette, and step-count bounds.

A step circuit is assembled from *groups* ``f(s) -> Circuit`` whose members
commute, each implementing ``exp(−i s H_group)``.  Order 1 applies every group
at ``Δt``; order 2 is the symmetric ``A(Δt/2) B(Δt/2) … Z(Δt) … B(Δt/2) A(Δt/2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import composite as C
from . import gates as G
from . import models as M
from .gates import Circuit
from .hilbert import StateVector

Group = Callable[[float], Circuit]


# ----------------------------------------------------------------------------
# generic product formulas
# ----------------------------------------------------------------------------

def product_formula(groups: Sequence[Group], dt: float, order: int) -> Circuit:
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    out = Circuit()
    if order == 1:
        for g in groups:
            out.append(g(dt))
        return out
    for g in groups[:-1]:
        out.append(g(dt / 2))
    out.append(groups[-1](dt))
    for g in reversed(groups[:-1]):
        out.append(g(dt / 2))
    return out


def phase_aligned_distance(U: np.ndarray, T: np.ndarray) -> float:
    """Spectral norm of U − e^{iφ} T with φ = arg tr(T† U)."""
    tr = np.trace(T.conj().T @ U)
    ph = tr / abs(tr) if abs(tr) > 1e-300 else 1.0
    return float(np.linalg.norm(U - ph * T, 2))


# ----------------------------------------------------------------------------
# Z2-Higgs
# ----------------------------------------------------------------------------

def z2_groups(params: M.Z2Params) -> list[Group]:
    """[field (electric + onsite), even hoppings, odd hoppings(, closing link)]."""
    if params.matter != "boson":
        raise ValueError("step circuits are built for bosonic matter")
    nmax = params.nmax
    bonds = M.z2_bonds(params)

    def field_group(s):
        c = Circuit()
        for l in range(params.n_links):
            c.append(M.z2_electric_step(l, params.g, s))
        if params.U != 0:
            for i in range(params.L):
                c.append(M.onsite_step(i, params.U, s, nmax))
        return c

    def hop_group(sel):
        def f(s):
            c = Circuit()
            for i, j, l in sel:
                phi = params.twist if (params.twist is not None and l == params.L - 1) else 0.0
                c.append(M.z2_gauge_hopping_step(i, j, l, params.J, s, phi))
            return c
        return f

    open_bonds = [b for b in bonds if b[2] < params.L - 1]
    groups = [field_group,
              hop_group([b for b in open_bonds if b[0] % 2 == 0]),
              hop_group([b for b in open_bonds if b[0] % 2 == 1])]
    if params.twist is not None:
        groups.append(hop_group([b for b in bonds if b[2] == params.L - 1]))
    return [g for g in groups if len(g(0.1)) > 0]


def z2_step_circuit(params: M.Z2Params, dt: float, order: int = 1) -> Circuit:
    """One Trotter step: field rotations (and onsite SNAPs), then conditional beamsplitters."""
    return product_formula(z2_groups(params), dt, order)


# ----------------------------------------------------------------------------
# U(1) quantum link model
# ----------------------------------------------------------------------------

def u1_mass_step(q: int, m: float, t: float) -> Circuit:
    """exp(−i m t n) = e^{−imt/2} Rz(−m t) with n = (1 − Z)/2 (global phase dropped)."""
    return Circuit([G.qubit_rz(q, -m * t)])


def u1_electric_step(params: M.U1Params, l: int, t: float) -> Circuit:
    """Two qubit-free SNAPs on the Schwinger pair of link ``l``."""
    ta, tb = M.u1_electric_angles(params, t)
    ma, mb = M.u1_link_modes(l)
    return Circuit([G.snap(None, ma, ta), G.snap(None, mb, tb)])


def u1_groups(params: M.U1Params) -> list[Group]:
    """[field (electric + mass), even-link H1, even-link H2, odd-link H1, odd-link H2]."""
    c = params.J / (2 * params.S)

    def field_group(s):
        out = Circuit()
        for l in range(params.n_links):
            out.append(u1_electric_step(params, l, s))
        for i in range(params.L):
            out.append(u1_mass_step(i, params.M * (-1) ** i, s))
        return out

    def hop(parity, part):
        builder = M.u1_hopping_h1 if part == 1 else M.u1_hopping_h2

        def f(s):
            out = Circuit()
            for l in range(parity, params.n_links, 2):
                ma, mb = M.u1_link_modes(l)
                out.append(builder(l, l + 1, ma, mb, c, s))
            return out
        return f

    groups = [field_group, hop(0, 1), hop(0, 2)]
    if params.n_links > 1:
        groups += [hop(1, 1), hop(1, 2)]
    return groups


def u1_step_circuit(params: M.U1Params, dt: float, order: int = 1) -> Circuit:
    """One Trotter step: electric SNAPs and mass rotations, then scheme-1 hoppings."""
    return product_formula(u1_groups(params), dt, order)


# ----------------------------------------------------------------------------
# eight-mode plaquette by nested group commutators
# ----------------------------------------------------------------------------

def _elementary(q: int, x: int, y: int, phi: float, pauli: str) -> C.Builder:
    """s ↦ exp(+is P (e^{iφ} a_x† a_y + h.c.))."""
    return lambda s: C.conditional_beamsplitter_pauli(q, x, y, phi, -s, pauli)


def _gamma(q, e1, e2, theta):
    return C.bch_commutator_high_order(_elementary(q, *e1), _elementary(q, *e2), theta)


def _delta(q, paulis, pairs, phases, phases2, theta):
    """Four-mode product of two hopping terms with the unwanted cross terms cancelled."""
    (x1, y1), (x2, y2) = pairs
    p1, p2 = paulis

    def g1(s):
        return _gamma(q, (x1, y1, phases[0], p1), (x2, y2, phases[1], p2), s)

    def g2(s):
        return _gamma(q, (x1, y1, phases2[0], p1), (x2, y2, phases2[1], p2), s)

    return C.trotter_add(g1, g2, theta, weight_power=2)


def _qubit_dag(q: int, c: Circuit) -> Circuit:
    """Conjugation by Rz(π) flips the sign of every Z-conditioned generator."""
    return C.conjugate(C.qubit_z_flip(q), c)


def _xi(q, modes, theta, ph_ab, ph_ef):
    a, b, c, d, e, f, g, h = modes
    D = _delta(q, ("Y", "Z"), [(a, b), (c, d)], *ph_ab, theta)
    Dt = _delta(q, ("Z", "X"), [(e, f), (g, h)], *ph_ef, theta)
    return C.product(D, Dt, _qubit_dag(q, D), _qubit_dag(q, Dt))


def plaquette_theta(g: float, S: float, t: float) -> float:
    """θ with 64 θ⁴ = t / (4 g² (S(S+1))²), the commutator-weight matching for one plaquette."""
    return (t / (256.0 * g * g * (S * (S + 1)) ** 2)) ** 0.25


def plaquette_bch(modes: Sequence[int], qubit: int, g: float, S: float, t: float) -> Circuit:
    """≈ exp(−i t H_□ Z_q) with H_□ = −(O + O†)/(4g²(S(S+1))²), O = a†b c†d e†f g†h.

    With the qubit in |0> this is time evolution under a single plaquette.  The
    leading error is O(θ⁵) in the commutator angle, i.e. O(t^{5/4}).
    """
    if len(modes) != 8:
        raise ValueError("plaquette needs eight link modes")
    if t < 0:
        raise ValueError("plaquette time must be non-negative")
    th = plaquette_theta(g, S, t)
    m = -math.pi / 2
    return C.product(
        _xi(qubit, modes, th, ((m, 0.0), (0.0, m)), ((m, 0.0), (0.0, m))),
        _xi(qubit, modes, th, ((math.pi, 0.0), (math.pi / 2, math.pi / 2)),
            ((0.0, 0.0), (math.pi / 2, -math.pi / 2))),
    )


def plaquette_operator(layout, modes: Sequence[int]) -> np.ndarray:
    """Dense O + O† for O = a†b c†d e†f g†h over ``modes``."""
    from .hilbert import mode_ops
    ops = [mode_ops(layout, m)[0] for m in modes]
    O = np.eye(layout.dim, dtype=complex)
    for k, A in enumerate(ops):
        O = O @ (A.conj().T if k % 2 == 0 else A)
    return O + O.conj().T


# ----------------------------------------------------------------------------
# step-count and gate-count bound estimates (unit constants)
# ----------------------------------------------------------------------------

def z2_h0_norm(L: int, g: float, U: float, N: int) -> float:
    """‖H_0‖ ≤ 2gL(L−1) + |U| L² N² on an L×L lattice."""
    return 2 * g * L * (L - 1) + abs(U) * L * L * N * N


def _steps(weight: float, T: float, eps: float, p: float) -> int:
    if eps <= 0 or p <= 0:
        raise ValueError("eps and p must be positive")
    if math.isinf(eps):
        return 1
    val = (weight * T) ** (1 + 1 / (2 * p)) * eps ** (-1 / (2 * p))
    return max(1, math.ceil(val - 1e-12))


def trotter_steps_z2(L: int, g: float, U: float, J: float, B: float, N: int,
                     T: float, eps: float, p: float = 1) -> int:
    """Bound estimate r = ⌈((2g + |U|N² + 4JN + B) L² T)^{1+1/2p} ε^{−1/2p}⌉."""
    return _steps((2 * g + abs(U) * N * N + 4 * J * N + B) * L * L, T, eps, p)


def trotter_steps_u1(L: int, g: float, S: float, J: float, M_: float, N: int,
                     T: float, eps: float, p: float = 1, large_s: bool = False) -> int:
    """Bound estimate from (½g²S² + MN + NJ + 1/(2g²)) L²; ``large_s`` keeps only (gSL)²."""
    if large_s:
        w = (g * S * L) ** 2
    else:
        w = (0.5 * g * g * S * S + abs(M_) * N + N * J + 1 / (2 * g * g)) * L * L
    return _steps(w, T, eps, p)


def plaquette_substeps(g: float, t: float, eps_box: float) -> int:
    """r_□ = ⌈g^{−10} t⁵ ε_□^{−4}⌉."""
    if eps_box <= 0:
        raise ValueError("eps_box must be positive")
    return max(1, math.ceil(g ** -10 * t ** 5 * eps_box ** -4 - 1e-12))


def plaquette_substeps_total(g: float, T: float, r: int, L: int, eps: float, p: float = 1,
                             bch_ratio: float = 1.0) -> int:
    """r_□ when the total commutator error is ``bch_ratio`` × ε spread over all calls.

    ε_□ = bch_ratio · ε / (2·5^{p−1} r (L−1)²) per plaquette call of duration T/r.
    """
    eps_box = bch_ratio * eps / (2 * 5 ** (p - 1) * r * max(1, (L - 1) ** 2))
    return plaquette_substeps(g, T / r, eps_box)


def total_gates(r: int, p: int, per_exponential: Sequence[int]) -> int:
    """N = r · 5^{p−1} · 2 · Σ_γ N_γ for a recursively built order-2p formula."""
    return int(r * 5 ** (p - 1) * 2 * sum(per_exponential))


# ----------------------------------------------------------------------------
# evolution
# ----------------------------------------------------------------------------

@dataclass
class TrotterPlan:
    order: int
    steps: int
    dt: float
    step_circuit: Circuit
    groups: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.order not in (1, 2):
            raise ValueError("order must be 1 or 2")


def z2_plan(params: M.Z2Params, T: float, steps: int, order: int = 1) -> TrotterPlan:
    dt = T / steps
    return TrotterPlan(order, steps, dt, z2_step_circuit(params, dt, order),
                       ["field", "hop-even", "hop-odd"])


def u1_plan(params: M.U1Params, T: float, steps: int, order: int = 1) -> TrotterPlan:
    dt = T / steps
    return TrotterPlan(order, steps, dt, u1_step_circuit(params, dt, order),
                       ["field", "hop-even-1", "hop-even-2", "hop-odd-1", "hop-odd-2"])


def evolve(state: StateVector, plan: TrotterPlan,
           observe: Callable[[StateVector], object] | None = None) -> tuple[StateVector, list]:
    """Apply ``plan.steps`` step circuits; ``observe`` is called at t = 0 and after each step."""
    snaps = []
    if observe is not None:
        snaps.append(observe(state))
    for _ in range(plan.steps):
        plan.step_circuit.apply(state)
        if observe is not None:
            snaps.append(observe(state))
    return state, snaps


# ----------------------------------------------------------------------------
# pair-hopping extraction from occupation dynamics
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class PairHoppingFit:
    """Effective pair tight-binding fit: amplitude ``hopping`` between neighbouring
    doubly occupied sites, ``rate`` the coefficient of (a_i†)² a_j² (= hopping / 2)."""

    hopping: float
    boundary_shift: float
    rate: float
    rms: float


def fit_pair_hopping(times: Sequence[float], occupations: np.ndarray, start: int) -> PairHoppingFit:
    """Least-squares fit of n_i(t) = 2 |<i| e^{-i H_eff t} |start>|² on an open chain.

    H_eff has nearest-neighbour amplitude −t_p and an energy offset on both end
    sites (they have one neighbour to hop virtually to instead of two).
    """
    from scipy.optimize import least_squares

    times = np.asarray(times, float)
    occ = np.asarray(occupations, float)
    L = occ.shape[1]
    e0 = np.eye(L)[start]

    def model(p):
        H = -p[0] * (np.eye(L, k=1) + np.eye(L, k=-1))
        H[0, 0] = H[-1, -1] = p[1]
        w, V = np.linalg.eigh(H)
        amp = (V * np.exp(-1j * np.outer(times, w))[:, None, :]) @ (V.T @ e0)
        return 2 * np.abs(amp) ** 2

    res = least_squares(lambda p: (model(p) - occ).ravel(), [0.1, 0.0])
    tp = abs(float(res.x[0]))
    return PairHoppingFit(tp, float(res.x[1]), tp / 2, float(np.sqrt(np.mean(res.fun ** 2))))
