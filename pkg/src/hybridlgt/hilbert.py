"""Truncated Fock space plus qubit tensor-product layouts and states.

Index convention: a basis state is addressed by the tuple
``(n_0, ..., n_{M-1}, b_0, ..., b_{Q-1})`` of mode occupations followed by
qubit bits, flattened in C order.  The last qubit varies fastest, so for a
single mode with cutoff 2 and one qubit, ``|n=2>|b=1>`` sits at index
``2 * 2 + 1 = 5``.  Qubit ``|0>`` has ``Z = +1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from . import kernels

ORACLE_CAP = 4096


class LayoutError(ValueError):
    """Raised for invalid layouts, targets, or occupations."""


@dataclass(frozen=True)
class SystemLayout:
    """Ordered bosonic modes (by cutoff ``n_max``) followed by qubits."""

    cutoffs: tuple[int, ...]
    n_qubits: int = 0

    def __post_init__(self):
        object.__setattr__(self, "cutoffs", tuple(int(c) for c in self.cutoffs))
        if any(c < 1 for c in self.cutoffs):
            raise LayoutError(f"cutoffs must be >= 1, got {self.cutoffs}")
        if self.n_qubits < 0:
            raise LayoutError("n_qubits must be non-negative")
        if not self.cutoffs and self.n_qubits == 0:
            raise LayoutError("zero-dimensional layout")

    @property
    def n_modes(self) -> int:
        return len(self.cutoffs)

    @cached_property
    def dims(self) -> tuple[int, ...]:
        return tuple(c + 1 for c in self.cutoffs) + (2,) * self.n_qubits

    @cached_property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def mode_axis(self, m: int) -> int:
        if not 0 <= m < self.n_modes:
            raise LayoutError(f"mode index {m} out of range for {self.n_modes} modes")
        return m

    def qubit_axis(self, q: int) -> int:
        if not 0 <= q < self.n_qubits:
            raise LayoutError(f"qubit index {q} out of range for {self.n_qubits} qubits")
        return self.n_modes + q

    def index(self, fock: Sequence[int], bits: Sequence[int] = ()) -> int:
        fock, bits = list(fock), list(bits)
        if len(fock) != self.n_modes or len(bits) != self.n_qubits:
            raise LayoutError("occupation/bit list length does not match layout")
        for n, c in zip(fock, self.cutoffs):
            if not 0 <= n <= c:
                raise LayoutError(f"occupation {n} outside [0, {c}]")
        for b in bits:
            if b not in (0, 1):
                raise LayoutError(f"bit {b} is not 0 or 1")
        return int(np.ravel_multi_index(tuple(fock + bits), self.dims))

    def labels(self, idx: int) -> tuple[int, ...]:
        return tuple(int(x) for x in np.unravel_index(idx, self.dims))

    def occupation_table(self) -> np.ndarray:
        """(dim, n_modes + n_qubits) integer table of basis labels."""
        grids = np.indices(self.dims).reshape(len(self.dims), -1)
        return grids.T.copy()


def new_layout(cutoffs: Sequence[int], n_qubits: int) -> SystemLayout:
    return SystemLayout(tuple(cutoffs), int(n_qubits))


# ----------------------------------------------------------------------------
# local operators
# ----------------------------------------------------------------------------

def annihilation(nmax: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, nmax + 1, dtype=float)), k=1).astype(complex)


def number(nmax: int) -> np.ndarray:
    return np.diag(np.arange(nmax + 1, dtype=float)).astype(complex)


def parity(nmax: int) -> np.ndarray:
    return np.diag((-1.0) ** np.arange(nmax + 1)).astype(complex)


PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|, lowers |1> -> |0>
SIGMA_PLUS = SIGMA_MINUS.T.copy()
P0 = np.diag([1.0, 0.0]).astype(complex)
P1 = np.diag([0.0, 1.0]).astype(complex)


def embed(layout: SystemLayout, ops: dict[int, np.ndarray]) -> np.ndarray:
    """Dense embedding of single-axis operators keyed by *axis* index."""
    out = np.ones((1, 1), dtype=complex)
    for ax, d in enumerate(layout.dims):
        out = np.kron(out, ops.get(ax, np.eye(d, dtype=complex)))
    return out


def embed_local(layout: SystemLayout, mat: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Dense embedding of a (possibly entangling) local matrix on ``axes``."""
    axes = list(axes)
    dims = layout.dims
    loc = [dims[a] for a in axes]
    D = int(np.prod(loc)) if axes else 1
    if mat.shape != (D, D):
        raise LayoutError(f"local matrix shape {mat.shape} does not match axes dims {loc}")
    eye = np.eye(layout.dim, dtype=complex)
    return kernels.apply_local(eye, dims, mat, axes)


def mode_op(layout: SystemLayout, m: int, op: np.ndarray) -> np.ndarray:
    return embed(layout, {layout.mode_axis(m): op})


def mode_ops(layout: SystemLayout, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Dense (a, n) on mode ``m``."""
    c = layout.cutoffs[m]
    return mode_op(layout, m, annihilation(c)), mode_op(layout, m, number(c))


def qubit_op(layout: SystemLayout, q: int, name: str | np.ndarray) -> np.ndarray:
    op = PAULI[name] if isinstance(name, str) else name
    return embed(layout, {layout.qubit_axis(q): op})


# ----------------------------------------------------------------------------
# states
# ----------------------------------------------------------------------------

@dataclass
class StateVector:
    """Complex amplitudes over a layout; mutated in place by circuit application."""

    layout: SystemLayout
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=complex)
        if self.data.shape != (self.layout.dim,):
            raise LayoutError(f"amplitude length {self.data.shape} != dim {self.layout.dim}")

    def copy(self) -> "StateVector":
        return StateVector(self.layout, self.data.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def normalize(self) -> "StateVector":
        self.data /= self.norm()
        return self

    def overlap(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.data, other.data))

    def fidelity(self, other: "StateVector") -> float:
        return abs(self.overlap(other)) ** 2

    def probabilities(self) -> np.ndarray:
        return np.abs(self.data) ** 2

    def tensor(self) -> np.ndarray:
        return self.data.reshape(self.layout.dims)

    def marginal(self, axis: int) -> np.ndarray:
        p = self.probabilities().reshape(self.layout.dims)
        other = tuple(a for a in range(p.ndim) if a != axis)
        return p.sum(axis=other)

    def mode_populations(self, m: int) -> np.ndarray:
        return self.marginal(self.layout.mode_axis(m))

    def top_level_weight(self, m: int, levels: int = 1) -> float:
        """Probability within the top ``levels`` Fock levels (truncation flag)."""
        return float(self.mode_populations(m)[-levels:].sum())

    def apply_local(self, mat: np.ndarray, axes: Sequence[int]) -> "StateVector":
        self.data = kernels.apply_local(self.data, self.layout.dims, mat, list(axes))
        return self


def basis_state(layout: SystemLayout, fock: Sequence[int], bits: Sequence[int] = ()) -> StateVector:
    v = np.zeros(layout.dim, dtype=complex)
    v[layout.index(fock, bits)] = 1.0
    return StateVector(layout, v)


def product_state(layout: SystemLayout, mode_states: Sequence[np.ndarray],
                  qubit_states: Sequence[np.ndarray] = ()) -> StateVector:
    """Tensor product of per-subsystem vectors, e.g. Fock |n> and qubit |+>."""
    if len(mode_states) != layout.n_modes or len(qubit_states) != layout.n_qubits:
        raise LayoutError("factor count does not match layout")
    v = np.ones(1, dtype=complex)
    for part, d in zip(list(mode_states) + list(qubit_states), layout.dims):
        part = np.asarray(part, dtype=complex)
        if part.shape != (d,):
            raise LayoutError(f"factor of length {part.shape} for subsystem of dim {d}")
        v = np.kron(v, part)
    return StateVector(layout, v).normalize()


def fock_vector(nmax: int, n: int) -> np.ndarray:
    if not 0 <= n <= nmax:
        raise LayoutError(f"occupation {n} outside [0, {nmax}]")
    v = np.zeros(nmax + 1, dtype=complex)
    v[n] = 1.0
    return v


QUBIT_KETS = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([1, 1], dtype=complex) / np.sqrt(2),
    "-": np.array([1, -1], dtype=complex) / np.sqrt(2),
}


def fock_product(layout: SystemLayout, fock: Sequence[int], qubits: Sequence[str] | str = "") -> StateVector:
    """Fock product on the modes and labelled (0, 1, +, -) qubit kets."""
    if isinstance(qubits, str):
        qubits = list(qubits)
    return product_state(
        layout,
        [fock_vector(c, n) for c, n in zip(layout.cutoffs, fock)],
        [QUBIT_KETS[s] for s in qubits],
    )


def expectation(state: StateVector, op: np.ndarray) -> complex:
    if op.shape != (state.layout.dim, state.layout.dim):
        raise LayoutError("operator dimension mismatch")
    return complex(np.vdot(state.data, op @ state.data))


def expm_hermitian(G: np.ndarray, scale: complex = -1j) -> np.ndarray:
    """exp(scale * G) for Hermitian ``G`` via eigendecomposition."""
    G = np.asarray(G, dtype=complex)
    w, v = np.linalg.eigh((G + G.conj().T) / 2)
    return (v * np.exp(scale * w)) @ v.conj().T


def max_abs_diff(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def equal_up_to_phase(a: np.ndarray, b: np.ndarray) -> float:
    """max|a - e^{iφ} b| with the phase φ chosen from the largest entry of b."""
    a, b = np.asarray(a), np.asarray(b)
    k = np.unravel_index(np.argmax(np.abs(b)), b.shape)
    ph = a[k] / b[k]
    ph /= abs(ph)
    return max_abs_diff(a, ph * b)
