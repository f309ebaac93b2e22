"""Composite primitives synthesized from native gates.

All builders return :class:`Circuit` objects in *application order* (first
element acts first).  Where a formula is written as an operator product
``U = A B C`` the circuit is ``[C, B, A]``; :func:`product` does that reversal.

Qubit frame changes use ``W = Ry(π/2) Rz(π)`` (a Hadamard up to a global
phase) so that every frame change enters as an exact conjugation ``W X W†``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import gates as G
from .gates import Circuit

Builder = Callable[[float], Circuit]
GAMMA_BCH = 1.0 / math.sqrt(4.0 - 2.0 * math.sqrt(2.0))


def product(*factors: Circuit) -> Circuit:
    """Circuit for the operator product ``factors[0] @ factors[1] @ ...``."""
    out = Circuit()
    for f in reversed(factors):
        out.append(f)
    return out


def conjugate(frame: Circuit, inner: Circuit) -> Circuit:
    """Circuit for ``F · inner · F†`` where ``frame`` implements F."""
    return frame.inverse() + inner + frame


# ----------------------------------------------------------------------------
# qubit frames
# ----------------------------------------------------------------------------

def hadamard_like(q: int) -> Circuit:
    """W = Ry(π/2)·Rz(π) = −iH.  W Z W† = X and W X W† = Z."""
    return Circuit([G.qubit_rz(q, math.pi), G.qubit_ry(q, math.pi / 2)])


def pauli_frame(q: int, pauli: str) -> Circuit:
    """Frame F with F Z F† = P for P in {Z, X, Y}."""
    if pauli == "Z":
        return Circuit()
    if pauli == "X":
        return hadamard_like(q)
    if pauli == "Y":
        return hadamard_like(q) + Circuit([G.qubit_rz(q, math.pi / 2)])
    raise ValueError(f"unknown Pauli {pauli!r}")


def qubit_z_flip(q: int) -> Circuit:
    """Rz(π) ∝ Z; conjugation by it flips X and Y."""
    return Circuit([G.qubit_rz(q, math.pi)])


# ----------------------------------------------------------------------------
# Table II rows
# ----------------------------------------------------------------------------

def bosonic_swap(i: int, j: int) -> Circuit:
    """|m,n> -> |n,m> exactly: BS(0, π/2) gives (−i)^{m+n}, undone by R(−π/2) on both."""
    if i == j:
        raise ValueError("SWAP needs two distinct modes")
    return Circuit([G.beamsplitter(i, j, 0.0, math.pi / 2),
                    G.rotation(i, -math.pi / 2), G.rotation(j, -math.pi / 2)])


def cond_parity_dag(q: int, m: int) -> Circuit:
    return Circuit(G.cond_parity_dag(q, m))


def conditional_displacement_synth(q: int, m: int, alpha: complex) -> Circuit:
    """CD(α) = CΠ · D(iα) · CΠ†, using CΠ a CΠ† = iZ a."""
    return product(Circuit([G.cond_parity(q, m)]), Circuit([G.displacement(m, 1j * alpha)]),
                   cond_parity_dag(q, m))


def conditional_beamsplitter(q: int, m1: int, m2: int, phi: float, theta: float) -> Circuit:
    """exp(−iθ Z_q (e^{iφ} a†_{m1} a_{m2} + h.c.)) = CΠ_{q,m1} BS(φ+π/2, θ) CΠ†_{q,m1}."""
    return product(Circuit([G.cond_parity(q, m1)]),
                   Circuit([G.beamsplitter(m1, m2, phi + math.pi / 2, theta)]),
                   cond_parity_dag(q, m1))


def conditional_beamsplitter_pauli(q: int, m1: int, m2: int, phi: float, theta: float,
                                   pauli: str = "Z") -> Circuit:
    """exp(−iθ P_q (e^{iφ} a†a + h.c.)) for P ∈ {X, Y, Z} via a qubit frame."""
    return conjugate(pauli_frame(q, pauli), conditional_beamsplitter(q, m1, m2, phi, theta))


def cond_parity_x(q: int, m: int) -> Circuit:
    """exp(−i(π/2) X_q n_m): CΠ in the X frame."""
    return conjugate(hadamard_like(q), Circuit([G.cond_parity(q, m)]))


def _check_binary_angles(thetas: Sequence[float]) -> tuple[float, ...]:
    out = []
    for t in thetas:
        if not (abs(t) < 1e-12 or abs(t - math.pi) < 1e-12):
            raise ValueError(f"projector angles must be 0 or π, got {t}")
        out.append(0.0 if abs(t) < 1e-12 else math.pi)
    return tuple(out)


def fock_projector_conditioned(anc: int, m_ctrl: int, inner: Circuit,
                               theta_p: Sequence[float]) -> Circuit:
    """exp(−i Z P̄ O) from ``inner`` = exp(−i Z O), where P̄ = I − 2P.

    SQR(θ⃗_P) Z SQR(θ⃗_P)† = Z P̄ since Rx(π) flips Z on every level with θ_n = π.
    """
    th = _check_binary_angles(theta_p)
    s = Circuit([G.sqr(anc, m_ctrl, th)])
    return conjugate(s, inner)


def fock_projector_controlled(anc: int, m_ctrl: int, inner: Builder,
                              theta_p: Sequence[float]) -> Circuit:
    """exp(−i Z P O) = exp(−i Z O/2) · exp(+i Z P̄ O/2).

    ``inner(s)`` must return a circuit for exp(−i s Z O).
    """
    return inner(0.5) + fock_projector_conditioned(anc, m_ctrl, inner(-0.5), theta_p)


def superparity_angles(nmax: int, k: int) -> tuple[float, ...]:
    """π⃗_k: θ_n = π when bit k of n is set."""
    return tuple(math.pi if (n >> k) & 1 else 0.0 for n in range(nmax + 1))


def n_stages(nmax: int) -> int:
    return max(1, math.ceil(math.log2(nmax + 1)))


def density_controlled(anc: int, m_ctrl: int, inner: Builder, nmax: int) -> Circuit:
    """exp(−i Z n_ctrl O) = Π_k exp(−i Z 2^k P_k O), P_k the k-th bit projector."""
    out = Circuit()
    for k in range(n_stages(nmax)):
        w = 2 ** k
        out.append(fock_projector_controlled(
            anc, m_ctrl, lambda s, w=w: inner(s * w), superparity_angles(nmax, k)))
    return out


def rr_gate(anc: int, i: int, j: int, theta: float, nmax_i: int) -> Circuit:
    """exp(−iθ Z_anc n_i n_j): density control on mode i around CR(anc, j)."""
    return density_controlled(anc, i, lambda s: Circuit([G.cond_rotation(anc, j, 2 * s * theta)]), nmax_i)


def zz_geometric(q1: int, q2: int, mode: int, theta: float) -> Circuit:
    """exp(−i(θ/2) Z1 Z2) from a closed conditional-displacement loop.

    CD1(−iβ) CD2(α) CD1(iβ) CD2(−α) = exp(−2i α β Z1 Z2) with α = √|θ|/2, β = sign(θ)α.
    """
    alpha = math.sqrt(abs(theta)) / 2.0
    beta = math.copysign(alpha, theta)
    return product(Circuit([G.cond_displacement(q1, mode, -1j * beta)]),
                   Circuit([G.cond_displacement(q2, mode, alpha)]),
                   Circuit([G.cond_displacement(q1, mode, 1j * beta)]),
                   Circuit([G.cond_displacement(q2, mode, -alpha)]))


def doubly_conditional_displacement(qi: int, qj: int, mode: int, alpha: complex) -> Circuit:
    """exp(Z_i Z_j (α a† − α* a)) = CΠ_i CD_j(iα) CΠ_i†."""
    return product(Circuit([G.cond_parity(qi, mode)]),
                   Circuit([G.cond_displacement(qj, mode, 1j * alpha)]),
                   cond_parity_dag(qi, mode))


def zzzz_geometric(qs: Sequence[int], mode: int, theta: float) -> Circuit:
    """exp(−i(θ/2) Z1 Z2 Z3 Z4): the zz loop with Z1Z2- and Z3Z4-conditioned displacements."""
    q1, q2, q3, q4 = qs
    alpha = math.sqrt(abs(theta)) / 2.0
    beta = math.copysign(alpha, theta)
    return product(doubly_conditional_displacement(q1, q2, mode, -1j * beta),
                   doubly_conditional_displacement(q3, q4, mode, alpha),
                   doubly_conditional_displacement(q1, q2, mode, 1j * beta),
                   doubly_conditional_displacement(q3, q4, mode, -alpha))


# ----------------------------------------------------------------------------
# approximate synthesis: group commutators and operator addition
# ----------------------------------------------------------------------------

def bch_commutator(opA: Builder, opB: Builder, theta: float) -> Circuit:
    """Γ = e^{iAθ} e^{iBθ} e^{−iAθ} e^{−iBθ} ≈ exp(−θ²[A, B]).

    ``opA(s)`` returns a circuit for e^{iAs}.
    """
    return product(opA(theta), opB(theta), opA(-theta), opB(-theta))


def _neg(op: Builder) -> Builder:
    return lambda s: op(-s)


def bch_commutator_high_order(opA: Builder, opB: Builder, theta: float) -> Circuit:
    """Fifth-order-accurate commutator exp(−θ²[A, B]) + O(θ⁵).

    W(s) = V(A,B,s) V(−A,−B,s) kills the θ³ error; W(γs) W̃(2^{1/4}γs) W(γs) with the
    swapped W̃(s) = V(B,A,s) V(−B,−A,s) kills the θ⁴ error and leaves net weight 1.
    """
    def W(s, x, y):
        return product(bch_commutator(x, y, s), bch_commutator(_neg(x), _neg(y), s))

    g = GAMMA_BCH
    return product(W(g * theta, opA, opB), W(2 ** 0.25 * g * theta, opB, opA), W(g * theta, opA, opB))


def trotter_add(op1, op2, theta: float | None = None, weight_power: int = 1) -> Circuit:
    """Operator addition.

    With two circuits: plain concatenation (op1 first).  With builders
    ``op(s)`` and ``theta``: the symmetric split op1(θ/2^{1/p}) op2(θ) op1(θ/2^{1/p}),
    where ``p = weight_power`` is the power of θ carried by each generator
    (2 for commutator blocks, so the outer factors use θ/√2).
    """
    if isinstance(op1, Circuit):
        return Circuit(list(op1.ops) + list(op2.ops))
    half = theta / 2 ** (1.0 / weight_power)
    return product(op1(half), op2(theta), op1(half))


# ----------------------------------------------------------------------------
# dual-rail qubits
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class DualRailQubit:
    """|0>_DR = |0,1>, |1>_DR = |1,0> on modes (a, b); Z^DR = e^{iπ n_a} on code space."""

    a: int
    b: int


def dual_rail_zz(dr1: DualRailQubit, dr2: DualRailQubit, anc: int, theta: float) -> Circuit:
    """e^{iθ/2} · exp(−i(θ/2) Z^DR Z^DR) on the code space.

    With Z = 1 − 2n_a: exp(−iθ/2 Z1Z2) = e^{−iθ/2} e^{iθ n1} e^{iθ n2} e^{−2iθ n1 n2}.
    The X-frame parity flips the ancilla on n1 = 1 so a CR on mode 2 imprints the
    n1 n2 phase; the second flip returns the ancilla and leaves (−1)^{n1}.
    """
    i, j = dr1.a, dr2.a
    return (cond_parity_x(anc, i)
            + Circuit([G.cond_rotation(anc, j, -2 * theta)])
            + cond_parity_x(anc, i)
            + Circuit([G.rotation(i, math.pi), G.rotation(i, -theta)]))


def dual_rail_conditional_displacement(dr: DualRailQubit, target: int, anc: int, theta: float) -> Circuit:
    """exp(−iθ Z^DR (t† + t)) on the code space; the ancilla returns to |0>."""
    return (cond_parity_x(anc, dr.a)
            + Circuit([G.cond_displacement(anc, target, -1j * theta)])
            + cond_parity_x(anc, dr.a)
            + Circuit([G.rotation(dr.a, math.pi)]))


def dual_rail_gauge_hopping(link: DualRailQubit, mode_i: int, mode_j: int, anc: int,
                            theta: float, phi: float = 0.0) -> Circuit:
    """exp(−iθ Z^DR (e^{iφ} a†_i a_j + h.c.)) with the link encoded in dual rail."""
    return (cond_parity_x(anc, link.a)
            + conditional_beamsplitter(anc, mode_i, mode_j, phi, theta)
            + cond_parity_x(anc, link.a)
            + Circuit([G.rotation(link.a, math.pi)]))


def code_space_projector(dims_na: int, dims_nb: int) -> np.ndarray:
    """Diagonal mask of the n_a + n_b = 1 subspace for a two-mode block."""
    na, nb = np.meshgrid(np.arange(dims_na), np.arange(dims_nb), indexing="ij")
    return ((na + nb) == 1).ravel().astype(float)


# ----------------------------------------------------------------------------
# two-qubit gadgets and the ancilla-free onsite term
# ----------------------------------------------------------------------------

def xz_rotation(qx: int, qz: int, mediator: int, theta: float) -> Circuit:
    """exp(−i(θ/2) X_qx Z_qz) via the geometric ZZ gate in the X frame of qx."""
    return conjugate(hadamard_like(qx), zz_geometric(qx, qz, mediator, theta))


def ancilla_free_onsite(i: int, q_left: int | None, q_right: int | None, U: float, t: float,
                        nmax: int, mediator: int | None = None) -> Circuit:
    """exp(−iU n_i² t) on the Gauss sector X_l e^{iπn_i} X_r = +1 without a spare qubit.

    On the sector n² = X_l X_r e^{iπn} n², so the target is exp(−i X_l X_r Σ θ_n |n><n|)
    with θ_n = (−1)^n U n² t.  SNAP(q_r) supplies exp(−i Z_r Σ θ_n |n><n|) and the frame
    V = exp(iπ/4 (1 − X_l) Z_r) · W_r maps Z_r to X_l X_r.  The entangling part of V is a
    mediated XZ rotation; ``mediator`` is an oscillator used only as a geometric bus.
    """
    thetas = [(-1) ** n * U * n * n * t for n in range(nmax + 1)]
    if q_left is None and q_right is None:
        raise ValueError("site needs at least one adjacent link qubit")
    if q_right is None:
        q_left, q_right = None, q_left
    frame = hadamard_like(q_right)
    if q_left is not None:
        if mediator is None:
            raise ValueError("two-link sites need a mediator mode")
        # exp(iπ/4 (1 − X_l) Z_r) = Rz_r(−π/2) · exp(−i(π/2)/2 · X_l Z_r)
        frame = (frame + xz_rotation(q_left, q_right, mediator, math.pi / 2)
                 + Circuit([G.qubit_rz(q_right, -math.pi / 2)]))
    return conjugate(frame, Circuit([G.snap(q_right, i, thetas)]))


# ----------------------------------------------------------------------------
# routing on a nearest-neighbour chain
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class ChainTopology:
    """Modes on a line (``order`` lists mode indices by position); each qubit has a home mode."""

    order: tuple[int, ...]
    home: dict

    def pos(self, m: int) -> int:
        return self.order.index(m)


def _swap_path(topo: ChainTopology, src: int, dst_pos: int) -> list[tuple[int, int]]:
    """SWAPs that walk ``src``'s content along the chain to position ``dst_pos``."""
    p = topo.pos(src)
    step = 1 if dst_pos > p else -1
    return [(topo.order[k], topo.order[k + step]) for k in range(p, dst_pos, step)]


def route(circuit: Circuit, topo: ChainTopology) -> Circuit:
    """Insert SWAP chains so every transmon-mode gate acts on the qubit's home mode and
    every beamsplitter acts on chain neighbours.  The routed unitary equals the input."""
    out = Circuit(layout=circuit.layout)
    for op in circuit.ops:
        swaps: list[tuple[int, int]] = []
        new = op
        if op.kind in G.TRANSMON_MODE_KINDS and op.qubits:
            q, m = op.qubits[0], op.modes[0]
            h = topo.home[q]
            if h != m:
                swaps = _swap_path(topo, m, topo.pos(h))
                new = G.GateInstruction(op.kind, (h,), op.qubits, op.params, op.duration, op.label)
        elif op.kind == "BS":
            i, j = op.modes
            pi, pj = topo.pos(i), topo.pos(j)
            if abs(pi - pj) > 1:
                target = pj - 1 if pj > pi else pj + 1
                swaps = _swap_path(topo, i, target)
                new = G.GateInstruction("BS", (topo.order[target], j), (), op.params, op.duration, op.label)
        for a, b in swaps:
            out.append(bosonic_swap(a, b))
        out.append(new)
        for a, b in reversed(swaps):
            out.append(bosonic_swap(a, b).inverse())
    return out
