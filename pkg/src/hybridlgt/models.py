"""Lattice gauge models in (1+1)D: Z2-Higgs and the U(1) quantum link model.

Z2 layout (boson matter): modes ``0..L-1`` are matter sites with cutoff ``N``;
qubits ``0..L-2`` are the links ``(i, i+1)``.  With a twisted periodic
boundary an extra link qubit ``L-1`` joins site ``L-1`` to site ``0``.

Z2 layout (fermion matter): no modes; qubits ``0..L-1`` are Jordan-Wigner
matter qubits (``|1>`` occupied) followed by the link qubits.

U(1) layout: modes ``2l, 2l+1`` are the Schwinger bosons ``(a, b)`` of link
``l`` with cutoff ``2S``; qubits ``0..L-1`` are Jordan-Wigner matter qubits.
S^z = (n_a − n_b)/2 and S^+ = a† b.

Matter hopping orientation: ``c_i† S^+_{i,i+1} c_{i+1}`` moves a fermion from
``i+1`` to ``i`` and raises the link.  Gauss's law is then
``G_i = S^z_{i,i+1} − S^z_{i−1,i} − Q_i`` with staggered charge
``Q_i = n_i − (1 − (−1)^i)/2`` (origin at site 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from itertools import product as iproduct
from typing import Sequence

import numpy as np

from . import composite as C
from . import gates as G
from .gates import Circuit
from .hilbert import (
    PAULI,
    SIGMA_MINUS,
    SIGMA_PLUS,
    LayoutError,
    SystemLayout,
    annihilation,
    embed_local,
    new_layout,
    number,
)


# ----------------------------------------------------------------------------
# parameters and term lists
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class Z2Params:
    L: int
    g: float = 1.0
    U: float = 1.0
    J: float = 1.0
    B: float = 0.0
    matter: str = "boson"
    N: int | None = None
    cutoff: int | None = None
    twist: float | None = None

    def __post_init__(self):
        if self.L < 2:
            raise ValueError("Z2 chain needs L >= 2")
        if self.matter not in ("boson", "fermion"):
            raise ValueError(f"matter must be 'boson' or 'fermion', got {self.matter!r}")
        for name in ("g", "U", "J", "B"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.N is not None and self.N < 0:
            raise ValueError("N must be non-negative")
        if self.cutoff is not None and self.cutoff < self.n_bosons:
            raise ValueError(f"cutoff {self.cutoff} below total boson number {self.n_bosons}")

    @property
    def n_bosons(self) -> int:
        return self.L if self.N is None else int(self.N)

    @property
    def nmax(self) -> int:
        """Per-site Fock cutoff: every boson fits on one site."""
        return max(1, self.cutoff if self.cutoff is not None else self.n_bosons)

    @property
    def n_links(self) -> int:
        return self.L - 1 + (self.twist is not None)


@dataclass(frozen=True)
class U1Params:
    L: int
    g: float = 1.0
    tau: float = 0.0
    J: float = 1.0
    M: float = 0.0
    S: float = 1.0

    def __post_init__(self):
        if self.L < 2:
            raise ValueError("U(1) chain needs L >= 2")
        if self.S < 0.5 or abs(2 * self.S - round(2 * self.S)) > 1e-12:
            raise ValueError("S must be a positive (half-)integer")
        for name in ("g", "tau", "J", "M"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def two_s(self) -> int:
        return int(round(2 * self.S))

    @property
    def n_links(self) -> int:
        return self.L - 1


@dataclass
class Term:
    """``coeff · local`` acting on layout axes ``axes``; ``group`` labels a commuting family."""

    coeff: complex
    local: np.ndarray
    axes: tuple[int, ...]
    label: str
    group: str

    def dense(self, layout: SystemLayout) -> np.ndarray:
        return self.coeff * embed_local(layout, self.local, self.axes)


@dataclass
class HamiltonianTermList:
    layout: SystemLayout
    terms: list[Term] = field(default_factory=list)
    constant: float = 0.0

    def add(self, coeff, local, axes, label, group):
        self.terms.append(Term(coeff, np.asarray(local, complex), tuple(axes), label, group))

    def dense(self) -> np.ndarray:
        H = self.constant * np.eye(self.layout.dim, dtype=complex)
        for t in self.terms:
            H = H + t.dense(self.layout)
        return H

    def groups(self) -> dict[str, list[Term]]:
        out: dict[str, list[Term]] = {}
        for t in self.terms:
            out.setdefault(t.group, []).append(t)
        return out


@dataclass
class GaussOperator:
    site: int
    op: np.ndarray
    target: float


def _kron(*ms: np.ndarray) -> np.ndarray:
    return reduce(np.kron, ms)


X, Y, Z, I2 = PAULI["X"], PAULI["Y"], PAULI["Z"], PAULI["I"]


# ----------------------------------------------------------------------------
# Z2-Higgs
# ----------------------------------------------------------------------------

def z2_layout(params: Z2Params) -> SystemLayout:
    if params.matter == "boson":
        return new_layout([params.nmax] * params.L, params.n_links)
    return new_layout([], params.L + params.n_links)


def _z2_axes(params: Z2Params, layout: SystemLayout):
    """(site axis, link axis) lookup functions."""
    if params.matter == "boson":
        return (lambda i: layout.mode_axis(i)), (lambda l: layout.qubit_axis(l))
    return (lambda i: layout.qubit_axis(i)), (lambda l: layout.qubit_axis(params.L + l))


def z2_bonds(params: Z2Params) -> list[tuple[int, int, int]]:
    """(site i, site j, link index) for every gauge link with hopping i <-> j."""
    bonds = [(i, i + 1, i) for i in range(params.L - 1)]
    if params.twist is not None:
        bonds.append((params.L - 1, 0, params.L - 1))
    return bonds


def build_z2_1d(params: Z2Params) -> tuple[SystemLayout, HamiltonianTermList, np.ndarray]:
    """H = −g Σ X_l + U Σ n_i² − J Σ (e^{iφ_l} m_i† Z_l m_j + h.c.).

    ``φ_l`` is zero except on the twisted closing link.  For fermions the onsite
    term reduces to U Σ n_i and hopping is the JW form ½ Z_l (X_i X_j + Y_i Y_j) on
    adjacent sites (the closing link would need a JW string and is rejected).
    """
    lay = z2_layout(params)
    site_ax, link_ax = _z2_axes(params, lay)
    terms = HamiltonianTermList(lay)
    for l in range(params.n_links):
        terms.add(-params.g, X, [link_ax(l)], f"electric[{l}]", "electric")
    if params.matter == "boson":
        nm = params.nmax
        a, n = annihilation(nm), number(nm)
        for i in range(params.L):
            terms.add(params.U, n @ n, [site_ax(i)], f"onsite[{i}]", "onsite")
        for i, j, l in z2_bonds(params):
            phase = np.exp(1j * params.twist) if (l == params.L - 1 and params.twist is not None) else 1.0
            # local order follows axes: (mode i, mode j, link)
            hop = phase * _kron(a.conj().T, a, Z)
            hop = hop + hop.conj().T
            parity = "even" if i % 2 == 0 else "odd"
            terms.add(-params.J, hop, [site_ax(i), site_ax(j), link_ax(l)], f"hop[{i},{j}]", f"hop-{parity}")
    else:
        if params.twist is not None:
            raise ValueError("twisted boundaries are only built for bosonic matter")
        nq = (I2 - Z) / 2
        for i in range(params.L):
            terms.add(params.U, nq, [site_ax(i)], f"onsite[{i}]", "onsite")
        for i, j, l in z2_bonds(params):
            hop = 0.5 * (_kron(X, X, Z) + _kron(Y, Y, Z))
            parity = "even" if i % 2 == 0 else "odd"
            terms.add(-params.J, hop, [site_ax(i), site_ax(j), link_ax(l)], f"hop[{i},{j}]", f"hop-{parity}")
    return lay, terms, terms.dense()


def gauss_ops_z2(layout: SystemLayout, params: Z2Params) -> list[GaussOperator]:
    """G_i = X_{i−1,i} e^{iπ n_i} X_{i,i+1}; absent boundary links count as X = +1."""
    site_ax, link_ax = _z2_axes(params, layout)
    out = []
    for i in range(params.L):
        links = [l for (a, b, l) in z2_bonds(params) if i in (a, b)]
        if params.matter == "boson":
            par = np.diag((-1.0) ** np.arange(params.nmax + 1)).astype(complex)
        else:
            par = Z.copy()
        axes = [site_ax(i)] + [link_ax(l) for l in links]
        local = _kron(par, *([X] * len(links)))
        out.append(GaussOperator(i, embed_local(layout, local, axes), 1.0))
    return out


def z2_total_number(layout: SystemLayout, params: Z2Params) -> np.ndarray:
    site_ax, _ = _z2_axes(params, layout)
    N = np.zeros((layout.dim, layout.dim), complex)
    for i in range(params.L):
        loc = number(params.nmax) if params.matter == "boson" else (I2 - Z) / 2
        N = N + embed_local(layout, loc, [site_ax(i)])
    return N


def sector_basis(layout: SystemLayout, gauss: Sequence[GaussOperator],
                 eigenvalues: Sequence[float] | None = None,
                 number_op: np.ndarray | None = None, n_total: float | None = None) -> np.ndarray:
    """Orthonormal columns spanning the joint eigenspace of commuting diagonalizable symmetries."""
    B = np.eye(layout.dim, dtype=complex)
    if number_op is not None and n_total is not None:
        keep = np.isclose(np.real(np.diag(number_op)), n_total)
        B = B[:, keep]
    for k, gop in enumerate(gauss):
        target = gop.target if eigenvalues is None else eigenvalues[k]
        M = B.conj().T @ gop.op @ B
        w, v = np.linalg.eigh((M + M.conj().T) / 2)
        B = B @ v[:, np.isclose(w, target, atol=1e-8)]
        if B.shape[1] == 0:
            break
    return B


def sector_ground(H: np.ndarray, basis: np.ndarray, k: int = 1):
    """Lowest ``k`` eigenpairs of H restricted to ``basis`` (columns), lifted back."""
    Hs = basis.conj().T @ H @ basis
    w, v = np.linalg.eigh((Hs + Hs.conj().T) / 2)
    return w[:k], basis @ v[:, :k]


# ----------------------------------------------------------------------------
# U(1) quantum link model with Schwinger bosons
# ----------------------------------------------------------------------------

def u1_layout(params: U1Params) -> SystemLayout:
    return new_layout([params.two_s] * (2 * params.n_links), params.L)


def u1_link_modes(l: int) -> tuple[int, int]:
    return 2 * l, 2 * l + 1


def u1_electric_angles(params: U1Params, t: float) -> tuple[list[float], list[float]]:
    """SNAP angle vectors (θ^a, θ^b) for exp(−i h_E t) on one link."""
    c = params.g ** 2 / 2 * t
    k = params.tau / (2 * math.pi)
    ns = range(params.two_s + 1)
    return ([c * (n * n / 2 - k * n) for n in ns], [c * (n * n / 2 + k * n) for n in ns])


def build_u1_1d(params: U1Params) -> tuple[SystemLayout, HamiltonianTermList, np.ndarray]:
    """H = (g²/2) Σ (S^z − τ/2π)² + M Σ (−1)^i n_i + (J/2S) Σ (c_i† S^+ c_{i+1} + h.c.).

    The electric term is stored in the two-SNAP form
    (g²/2)[(n_a² + n_b²)/2 − (τ/2π)(n_a − n_b)] plus the identity constant
    (g²/2)((τ/2π)² − S²) per link, which equals (g²/2)(S^z − τ/2π)² whenever
    n_a + n_b = 2S.
    """
    lay = u1_layout(params)
    tl = HamiltonianTermList(lay)
    ts = params.two_s
    a, n = annihilation(ts), number(ts)
    k = params.tau / (2 * math.pi)
    c = params.g ** 2 / 2
    for l in range(params.n_links):
        ma, mb = u1_link_modes(l)
        tl.add(c, n @ n / 2 - k * n, [lay.mode_axis(ma)], f"electric-a[{l}]", "electric")
        tl.add(c, n @ n / 2 + k * n, [lay.mode_axis(mb)], f"electric-b[{l}]", "electric")
        tl.constant += c * (k * k - params.S ** 2)
    nq = (I2 - Z) / 2
    for i in range(params.L):
        tl.add(params.M * (-1) ** i, nq, [lay.qubit_axis(i)], f"mass[{i}]", "mass")
    for l in range(params.n_links):
        i, j = l, l + 1
        ma, mb = u1_link_modes(l)
        # local order: (mode a, mode b, qubit i, qubit j)
        hop = _kron(a.conj().T, a, SIGMA_PLUS, SIGMA_MINUS)
        hop = hop + hop.conj().T
        parity = "even" if l % 2 == 0 else "odd"
        tl.add(params.J / (2 * params.S), hop,
               [lay.mode_axis(ma), lay.mode_axis(mb), lay.qubit_axis(i), lay.qubit_axis(j)],
               f"hop[{l}]", f"hop-{parity}")
    return lay, tl, tl.dense()


def u1_sz(layout: SystemLayout, l: int) -> np.ndarray:
    ma, mb = u1_link_modes(l)
    n = number(layout.cutoffs[ma])
    return 0.5 * (embed_local(layout, n, [ma]) - embed_local(layout, n, [mb]))


def gauss_ops_u1(layout: SystemLayout, params: U1Params) -> list[GaussOperator]:
    """G_i = S^z_{i,i+1} − S^z_{i−1,i} − Q_i with target 0 (no static charges)."""
    out = []
    dim = layout.dim
    for i in range(params.L):
        Gi = np.zeros((dim, dim), complex)
        if i < params.n_links:
            Gi = Gi + u1_sz(layout, i)
        if i > 0:
            Gi = Gi - u1_sz(layout, i - 1)
        nq = embed_local(layout, (I2 - Z) / 2, [layout.qubit_axis(i)])
        Gi = Gi - nq + 0.5 * (1 - (-1) ** i) * np.eye(dim)
        out.append(GaussOperator(i, Gi, 0.0))
    return out


def schwinger_constraint_ops(layout: SystemLayout, params: U1Params) -> list[GaussOperator]:
    """n_a + n_b per link with target 2S."""
    out = []
    for l in range(params.n_links):
        ma, mb = u1_link_modes(l)
        n = number(params.two_s)
        out.append(GaussOperator(l, embed_local(layout, n, [ma]) + embed_local(layout, n, [mb]),
                                 float(params.two_s)))
    return out


def u1_physical_basis(layout: SystemLayout, params: U1Params) -> np.ndarray:
    """Columns spanning the Gauss-law-zero sector inside the Schwinger constraint."""
    return sector_basis(layout, schwinger_constraint_ops(layout, params) + gauss_ops_u1(layout, params))


def u1_vacuum_labels(params: U1Params) -> tuple[list[int], list[int]]:
    """Fock occupations and matter bits of |↓ 0 ↑ 0 ↓ …⟩ (odd sites filled, S^z = 0)."""
    S2 = params.two_s
    fock = []
    for _ in range(params.n_links):
        fock += [S2 // 2, S2 - S2 // 2]
    bits = [i % 2 for i in range(params.L)]
    return fock, bits


# ----------------------------------------------------------------------------
# Jordan-Wigner helpers
# ----------------------------------------------------------------------------

def jw_annihilation(n_sites: int, i: int) -> np.ndarray:
    """c_i = Z_0 … Z_{i−1} σ⁻_i on ``n_sites`` qubits (qubit 0 leftmost in the kron)."""
    ops = [Z] * i + [SIGMA_MINUS] + [I2] * (n_sites - i - 1)
    return _kron(*ops)


def pauli_decompose(op: np.ndarray, n_qubits: int, tol: float = 1e-12) -> dict[str, complex]:
    """Coefficients c_P with op = Σ c_P P over Pauli strings (qubit 0 first)."""
    out = {}
    for labels in iproduct("IXYZ", repeat=n_qubits):
        P = _kron(*[PAULI[s] for s in labels])
        c = np.trace(P.conj().T @ op) / 2 ** n_qubits
        if abs(c) > tol:
            out["".join(labels)] = complex(c)
    return out


def jordan_wigner_1d(n_sites: int, terms: Sequence[tuple[complex, Sequence[tuple[str, int]]]]
                     ) -> dict[str, complex]:
    """Map Σ coeff · Π (c or c†) to Pauli strings.

    ``terms`` holds ``(coeff, [("cdag", i), ("c", j), ...])`` with the product read
    left to right.  Returns the Pauli-string coefficients.
    """
    dim = 2 ** n_sites
    total = np.zeros((dim, dim), complex)
    for coeff, factors in terms:
        m = np.eye(dim, dtype=complex)
        for kind, site in factors:
            c = jw_annihilation(n_sites, site)
            if kind == "c":
                m = m @ c
            elif kind == "cdag":
                m = m @ c.conj().T
            else:
                raise ValueError(f"unknown fermion operator {kind!r}")
        total = total + coeff * m
    return pauli_decompose(total, n_sites)


def _global_phase(mediator: int, nmax: int, phase: float) -> Circuit:
    """e^{iφ}·I via a qubit-free SNAP with constant angles on the mediator mode."""
    return Circuit([G.snap(None, mediator, [-phase] * (nmax + 1))])


def _pp_rotation(q1: int, q2: int, p1: str, p2: str, mediator: int, theta: float) -> Circuit:
    """exp(−i(θ/2) P1 P2) by conjugating the geometric ZZ gate into the P frame."""
    frame = C.pauli_frame(q1, p1) + C.pauli_frame(q2, p2)
    return C.conjugate(frame, C.zz_geometric(q1, q2, mediator, theta))


def iswap_theta_circuit(q1: int, q2: int, theta: float, mediator: int) -> Circuit:
    """iSWAP(θ) = exp(i(θ/2)(XX + YY)); θ = π/2 maps |01> → i|10>."""
    return _pp_rotation(q1, q2, "X", "X", mediator, -theta) + _pp_rotation(q1, q2, "Y", "Y", mediator, -theta)


def fswap_circuit(q1: int, q2: int, mediator: int, nmax: int) -> Circuit:
    """FSWAP = SWAP·CZ = iSWAP(π/2)·(S† ⊗ S†), exact including global phase."""
    return (Circuit([G.qubit_rz(q1, -math.pi / 2), G.qubit_rz(q2, -math.pi / 2)])
            + iswap_theta_circuit(q1, q2, math.pi / 2, mediator)
            + _global_phase(mediator, nmax, -math.pi / 2))


def iswap_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[1, 0, 0, 0], [0, c, 1j * s, 0], [0, 1j * s, c, 0], [0, 0, 0, 1]], complex)


FSWAP_MATRIX = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, -1]], complex)


# ----------------------------------------------------------------------------
# elementary evolution circuits
# ----------------------------------------------------------------------------

def holstein_step(q: int, mode: int, g: float, t: float) -> Circuit:
    """exp(−i t (g/2)(Z + 1)(a† + a)) = CD(−iβ) D(−iβ), β = g t / 2.

    The qubit |0> branch is displaced by −i g t; the |1> branch is untouched.
    """
    beta = g * t / 2
    return Circuit([G.cond_displacement(q, mode, -1j * beta), G.displacement(mode, -1j * beta)])


def z2_gauge_hopping_step(i: int, j: int, link_qubit: int, J: float, t: float, phi: float = 0.0) -> Circuit:
    """exp(+iJt Z (e^{iφ} a_i† a_j + h.c.)): the hopping term as one conditional beamsplitter."""
    return C.conditional_beamsplitter(link_qubit, i, j, phi, -J * t)


def z2_electric_step(link_qubit: int, g: float, t: float) -> Circuit:
    """exp(+igt X) = Rx(−2gt)."""
    return Circuit([G.qubit_rx(link_qubit, -2 * g * t)])


def onsite_step(mode: int, U: float, t: float, nmax: int) -> Circuit:
    """exp(−iUt n²) as a qubit-free SNAP."""
    return Circuit([G.snap(None, mode, [U * t * n * n for n in range(nmax + 1)])])


def doubly_conditional_beamsplitter(qi: int, qj: int, ma: int, mb: int, phi: float, theta: float,
                                    pi: str = "Z", pj: str = "Z") -> Circuit:
    """exp(−iθ P_i P_j (e^{iφ} a† b + h.c.)).

    CΠ_{i,a} turns the Z_j-conditioned beamsplitter at phase φ + π/2 into a Z_i Z_j one;
    per-qubit frames rotate each Z into the requested Pauli.
    """
    core = C.product(Circuit([G.cond_parity(qi, ma)]),
                     C.conditional_beamsplitter(qj, ma, mb, phi + math.pi / 2, theta),
                     C.cond_parity_dag(qi, ma))
    return C.conjugate(C.pauli_frame(qi, pi) + C.pauli_frame(qj, pj), core)


def u1_hopping_h1(qi: int, qj: int, ma: int, mb: int, coeff: float, t: float) -> Circuit:
    """exp(−i t (c/4)(X_i X_j + Y_i Y_j)(a† b + h.c.))."""
    th = coeff * t / 4
    return (doubly_conditional_beamsplitter(qi, qj, ma, mb, 0.0, th, "X", "X")
            + doubly_conditional_beamsplitter(qi, qj, ma, mb, 0.0, th, "Y", "Y"))


def u1_hopping_h2(qi: int, qj: int, ma: int, mb: int, coeff: float, t: float) -> Circuit:
    """exp(−i t (c/4)(X_i Y_j − Y_i X_j)(i a† b + h.c.))."""
    th = coeff * t / 4
    return (doubly_conditional_beamsplitter(qi, qj, ma, mb, math.pi / 2, th, "X", "Y")
            + doubly_conditional_beamsplitter(qi, qj, ma, mb, math.pi / 2, -th, "Y", "X"))


def u1_gauge_hopping_step_scheme1(qi: int, qj: int, ma: int, mb: int, J: float, S: float, t: float) -> Circuit:
    """exp(−i t (J/2S)(σ⁺_i a† b σ⁻_j + h.c.)) to first order: the H1 block, then H2.

    Inside each block the two Pauli terms commute, so the only splitting error is
    between the blocks and scales as t².
    """
    c = J / (2 * S)
    return u1_hopping_h1(qi, qj, ma, mb, c, t) + u1_hopping_h2(qi, qj, ma, mb, c, t)


def dual_rail_gauge_hopping(link_dr: C.DualRailQubit, mode_i: int, mode_j: int, anc: int,
                            theta: float, phi: float = 0.0) -> Circuit:
    """exp(−iθ Z^DR (e^{iφ} a_i† a_j + h.c.)) with the Z2 link held in a dual-rail pair."""
    return C.dual_rail_gauge_hopping(link_dr, mode_i, mode_j, anc, theta, phi)


def check_params_layout(layout: SystemLayout, cutoffs: Sequence[int], n_qubits: int) -> None:
    if tuple(layout.cutoffs) != tuple(cutoffs) or layout.n_qubits != n_qubits:
        raise LayoutError("layout does not match model parameters")
