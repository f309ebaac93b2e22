"""Native oscillator-qubit gate set, circuits, and nominal durations.

Every gate is an exact matrix built on the truncated Fock space.  Generator
conventions:

    R_m(θ)          exp(−iθ n_m)
    D_m(α)          exp(α a†_m − α* a_m)
    BS_ij(φ, θ)     exp(−iθ(e^{iφ} a†_i a_j + h.c.))
    Rz_q(θ)         exp(−i(θ/2) Z_q)
    Rφ_q(θ)         exp(−i(θ/2)(cosφ X_q + sinφ Y_q))
    CR_qm(θ)        exp(−i(θ/2) Z_q n_m)
    CΠ_qm           CR_qm(π)
    CD_qm(α)        exp(Z_q(α a†_m − α* a_m))
    SNAP_qm(θ⃗)      exp(−i Z_q Σ_n θ_n |n><n|_m)
    SQR_qm(θ⃗, φ⃗)    Σ_n Rφn_q(θ_n) ⊗ |n><n|_m

Constructors take ``(qubit, mode)`` for transmon-mode gates.  The local matrix
of an instruction is always ordered over its modes first, then its qubits.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import kernels
from .hilbert import (
    ORACLE_CAP,
    P0,
    P1,
    PAULI,
    LayoutError,
    StateVector,
    SystemLayout,
    annihilation,
    expm_hermitian,
)

US = 1e-6


@dataclass(frozen=True)
class GateDurations:
    """Nominal gate times in seconds."""

    cond_parity: float = 1.0 * US
    beamsplitter: float = 0.25 * US
    single_qubit: float = 0.01 * US
    snap: float = 1.0 * US
    displacement: float = 0.01 * US
    chi: float | None = math.pi * 1e6  # rad/s; fixes cond_parity = π/χ

    def __post_init__(self):
        if self.chi is not None:
            if self.chi <= 0:
                raise ValueError("chi must be positive")
            object.__setattr__(self, "cond_parity", math.pi / self.chi)
        for name in ("cond_parity", "beamsplitter", "single_qubit", "snap", "displacement"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def of(self, kind: str, params: tuple) -> float:
        if kind in ("R", "MEASURE", "RESET", "UNITARY"):
            return 0.0
        if kind == "BS":
            return self.beamsplitter
        if kind in ("RZ", "RPHI"):
            return self.single_qubit
        if kind == "D":
            return self.displacement
        if kind == "CP":
            return self.cond_parity
        if kind == "CR":
            return abs(float(params[0])) / math.pi * self.cond_parity
        if kind == "CD":
            return self.cond_parity
        if kind in ("SNAP", "SQR"):
            return self.snap
        raise KeyError(kind)


DEFAULT_DURATIONS = GateDurations()
ZERO_DURATIONS = GateDurations(0.0, 0.0, 0.0, 0.0, 0.0, chi=None)
_active_profile = [DEFAULT_DURATIONS]


@contextlib.contextmanager
def duration_profile(profile: GateDurations) -> Iterator[GateDurations]:
    """Gates constructed inside the block take their durations from ``profile``."""
    _active_profile.append(profile)
    try:
        yield profile
    finally:
        _active_profile.pop()


def active_profile() -> GateDurations:
    return _active_profile[-1]


NATIVE_KINDS = ("R", "D", "BS", "RZ", "RPHI", "CR", "CP", "CD", "SNAP", "SQR")
TRANSMON_MODE_KINDS = ("CR", "CP", "CD", "SNAP", "SQR")


def _check_finite(*vals):
    for v in vals:
        arr = np.asarray(v)
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"non-finite gate parameter {v!r}")


@dataclass(frozen=True)
class GateInstruction:
    kind: str
    modes: tuple[int, ...]
    qubits: tuple[int, ...]
    params: tuple = ()
    duration: float = 0.0
    label: str = ""

    def axes(self, layout: SystemLayout) -> list[int]:
        return [layout.mode_axis(m) for m in self.modes] + [layout.qubit_axis(q) for q in self.qubits]

    def resources(self) -> tuple:
        return tuple(("m", m) for m in self.modes) + tuple(("q", q) for q in self.qubits)

    def validate(self, layout: SystemLayout) -> None:
        self.axes(layout)
        if self.kind in ("SNAP", "SQR"):
            c = layout.cutoffs[self.modes[0]]
            for vec in self.params:
                if len(vec) != c + 1:
                    raise LayoutError(
                        f"{self.kind} angle vector length {len(vec)} != cutoff+1 = {c + 1}")

    def local_matrix(self, layout: SystemLayout) -> np.ndarray:
        cut = tuple(layout.cutoffs[m] for m in self.modes)
        if self.kind == "UNITARY":
            return self.params[0]
        return _local_matrix(self.kind, self.params, cut, len(self.qubits))

    def adjoint(self) -> list["GateInstruction"]:
        k, p = self.kind, self.params
        if k == "CP":
            # CΠ† = CΠ · R(−π): the rotation undoes the extra π phase on Z=+1.
            return [self, GateInstruction("R", self.modes, (), (-math.pi,), 0.0, "R")]
        if k in ("MEASURE", "RESET"):
            raise ValueError(f"{k} has no adjoint")
        if k == "UNITARY":
            return [replace(self, params=(p[0].conj().T,))]
        if k in ("R", "D", "RZ", "CR", "CD"):
            newp = (-p[0],)
        elif k in ("BS", "RPHI"):
            newp = (p[0], -p[1])
        elif k == "SNAP":
            newp = (tuple(-x for x in p[0]),)
        elif k == "SQR":
            newp = (tuple(-x for x in p[0]), p[1])
        else:
            raise KeyError(k)
        return [replace(self, params=newp)]


@lru_cache(maxsize=8192)
def _local_matrix(kind: str, params: tuple, cut: tuple[int, ...], nq: int) -> np.ndarray:
    if kind == "R":
        (theta,) = params
        return np.diag(np.exp(-1j * theta * np.arange(cut[0] + 1)))
    if kind == "D":
        return displacement_matrix(cut[0], params[0])
    if kind == "BS":
        phi, theta = params
        a1, a2 = annihilation(cut[0]), annihilation(cut[1])
        hop = np.exp(1j * phi) * np.kron(a1.conj().T, a2)
        return expm_hermitian(theta * (hop + hop.conj().T))
    if kind == "RZ":
        (theta,) = params
        return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])
    if kind == "RPHI":
        return rphi_matrix(*params)
    if kind in ("CR", "CP"):
        theta = math.pi if kind == "CP" else params[0]
        n = np.arange(cut[0] + 1)
        z = np.array([1.0, -1.0])
        return np.diag(np.exp(-0.5j * theta * np.outer(n, z).ravel()))
    if kind == "CD":
        (alpha,) = params
        return np.kron(displacement_matrix(cut[0], alpha), P0) + np.kron(
            displacement_matrix(cut[0], -alpha), P1)
    if kind == "SNAP":
        th = np.asarray(params[0], dtype=float)
        if nq == 0:
            return np.diag(np.exp(-1j * th))
        return np.diag(np.exp(-1j * np.outer(th, [1.0, -1.0]).ravel()))
    if kind == "SQR":
        th, ph = params
        out = np.zeros((2 * (cut[0] + 1),) * 2, dtype=complex)
        for n, (t, f) in enumerate(zip(th, ph)):
            out[2 * n:2 * n + 2, 2 * n:2 * n + 2] = rphi_matrix(f, t)
        return out
    raise KeyError(kind)


def displacement_matrix(nmax: int, alpha: complex) -> np.ndarray:
    a = annihilation(nmax)
    gen = 1j * (alpha * a.conj().T - np.conj(alpha) * a)  # exp(-i gen) = D(α)
    return expm_hermitian(gen)


def rphi_matrix(phi: float, theta: float) -> np.ndarray:
    sig = math.cos(phi) * PAULI["X"] + math.sin(phi) * PAULI["Y"]
    return math.cos(theta / 2) * np.eye(2) - 1j * math.sin(theta / 2) * sig


# ----------------------------------------------------------------------------
# constructors
# ----------------------------------------------------------------------------

def _mk(kind, modes, qubits, params, label=""):
    modes = tuple(int(m) for m in modes)
    qubits = tuple(int(q) for q in qubits)
    if len(set(modes)) != len(modes):
        raise LayoutError(f"{kind}: repeated mode targets {modes}")
    return GateInstruction(kind, modes, qubits, tuple(params),
                           active_profile().of(kind, tuple(params)), label or kind)


def rotation(i: int, theta: float) -> GateInstruction:
    _check_finite(theta)
    return _mk("R", (i,), (), (float(theta),))


def displacement(i: int, alpha: complex) -> GateInstruction:
    _check_finite(alpha)
    return _mk("D", (i,), (), (complex(alpha),))


def beamsplitter(i: int, j: int, phi: float, theta: float) -> GateInstruction:
    _check_finite(phi, theta)
    return _mk("BS", (i, j), (), (float(phi), float(theta)))


def qubit_rz(q: int, theta: float) -> GateInstruction:
    _check_finite(theta)
    return _mk("RZ", (), (q,), (float(theta),))


def qubit_rphi(q: int, phi: float, theta: float) -> GateInstruction:
    _check_finite(phi, theta)
    return _mk("RPHI", (), (q,), (float(phi), float(theta)))


def qubit_rx(q: int, theta: float) -> GateInstruction:
    return qubit_rphi(q, 0.0, theta)


def qubit_ry(q: int, theta: float) -> GateInstruction:
    return qubit_rphi(q, math.pi / 2, theta)


def cond_rotation(q: int, m: int, theta: float) -> GateInstruction:
    _check_finite(theta)
    return _mk("CR", (m,), (q,), (float(theta),))


def cond_parity(q: int, m: int) -> GateInstruction:
    return _mk("CP", (m,), (q,), ())


def cond_parity_dag(q: int, m: int) -> list[GateInstruction]:
    return cond_parity(q, m).adjoint()


def cond_displacement(q: int, m: int, alpha: complex) -> GateInstruction:
    _check_finite(alpha)
    return _mk("CD", (m,), (q,), (complex(alpha),))


def snap(q: int | None, m: int, thetas: Sequence[float]) -> GateInstruction:
    """SNAP gate.  ``q=None`` is the number-selective phase with the dispersive
    transmon parked in |0> (Z=+1), i.e. exp(−i Σ θ_n |n><n|)."""
    th = tuple(float(x) for x in thetas)
    _check_finite(th)
    return _mk("SNAP", (m,), () if q is None else (q,), (th,))


def sqr(q: int, m: int, thetas: Sequence[float], phis: Sequence[float] | None = None) -> GateInstruction:
    th = tuple(float(x) for x in thetas)
    ph = tuple(0.0 for _ in th) if phis is None else tuple(float(x) for x in phis)
    if len(th) != len(ph):
        raise ValueError("SQR angle vectors must have equal length")
    _check_finite(th, ph)
    return _mk("SQR", (m,), (q,), (th, ph))


def local_unitary(modes: Sequence[int], qubits: Sequence[int], mat: np.ndarray, label="U") -> GateInstruction:
    """Non-native dense unitary (used only for oracle-scale algorithm blocks)."""
    return GateInstruction("UNITARY", tuple(modes), tuple(qubits), (np.asarray(mat, complex),), 0.0, label)


def measure(q: int) -> GateInstruction:
    return GateInstruction("MEASURE", (), (int(q),), (), 0.0, "MEASURE")


def reset(q: int) -> GateInstruction:
    return GateInstruction("RESET", (), (int(q),), (), 0.0, "RESET")


# ----------------------------------------------------------------------------
# circuits
# ----------------------------------------------------------------------------

@dataclass
class Circuit:
    """Ordered native-gate list; the layout is optional until application."""

    ops: list[GateInstruction] = field(default_factory=list)
    layout: SystemLayout | None = None

    def __post_init__(self):
        if self.layout is not None:
            for op in self.ops:
                op.validate(self.layout)

    def __len__(self) -> int:
        return len(self.ops)

    def __iter__(self):
        return iter(self.ops)

    def append(self, item: "GateInstruction | Circuit | Iterable[GateInstruction]") -> "Circuit":
        if isinstance(item, GateInstruction):
            items = [item]
        elif isinstance(item, Circuit):
            items = item.ops
        else:
            items = list(item)
        for op in items:
            if self.layout is not None:
                op.validate(self.layout)
            self.ops.append(op)
        return self

    def __iadd__(self, item):
        return self.append(item)

    def __add__(self, other: "Circuit") -> "Circuit":
        return Circuit(list(self.ops) + list(other.ops), self.layout or other.layout)

    def bind(self, layout: SystemLayout) -> "Circuit":
        return Circuit(list(self.ops), layout)

    def inverse(self) -> "Circuit":
        out: list[GateInstruction] = []
        for op in reversed(self.ops):
            out.extend(op.adjoint())
        return Circuit(out, self.layout)

    # ---- accounting -------------------------------------------------------
    @property
    def duration(self) -> float:
        """Sequential sum of instruction durations."""
        return float(sum(op.duration for op in self.ops))

    def schedule(self) -> list[tuple[float, float]]:
        """ASAP (start, end) per instruction; gates sharing a mode or qubit serialize."""
        ready: dict = {}
        out = []
        for op in self.ops:
            res = op.resources()
            start = max((ready.get(r, 0.0) for r in res), default=0.0)
            end = start + op.duration
            for r in res:
                ready[r] = end
            out.append((start, end))
        return out

    @property
    def depth_time(self) -> float:
        """Critical-path duration under ASAP scheduling."""
        sched = self.schedule()
        return max((e for _, e in sched), default=0.0)

    def count(self, *kinds: str) -> int:
        return sum(1 for op in self.ops if op.kind in kinds)

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for op in self.ops:
            out[op.kind] = out.get(op.kind, 0) + 1
        return out

    def with_durations(self, profile: GateDurations) -> "Circuit":
        return Circuit([replace(op, duration=profile.of(op.kind, op.params)) for op in self.ops], self.layout)

    # ---- simulation -------------------------------------------------------
    def _layout(self, layout: SystemLayout | None) -> SystemLayout:
        lay = layout or self.layout
        if lay is None:
            raise LayoutError("circuit has no layout; pass one explicitly")
        return lay

    def apply(self, state: StateVector, rng: np.random.Generator | None = None) -> list[tuple[int, int]]:
        """Apply in place; returns (qubit, outcome) for any MEASURE/RESET."""
        lay = state.layout
        outcomes = []
        for op in self.ops:
            if op.kind in ("MEASURE", "RESET"):
                if rng is None:
                    raise ValueError("mid-circuit measurement needs an rng")
                bit = measure_qubit(state, op.qubits[0], rng, reset=op.kind == "RESET")
                outcomes.append((op.qubits[0], bit))
                continue
            state.data = kernels.apply_local(state.data, lay.dims, op.local_matrix(lay), op.axes(lay))
        return outcomes

    def apply_array(self, data: np.ndarray, layout: SystemLayout | None = None) -> np.ndarray:
        lay = self._layout(layout)
        for op in self.ops:
            if op.kind in ("MEASURE", "RESET"):
                raise ValueError("exact application cannot include measurements")
            data = kernels.apply_local(data, lay.dims, op.local_matrix(lay), op.axes(lay))
        return data

    def unitary(self, layout: SystemLayout | None = None, cap: int = ORACLE_CAP) -> np.ndarray:
        return exact_unitary(self, layout, cap)


def exact_unitary(circuit: Circuit, layout: SystemLayout | None = None, cap: int = ORACLE_CAP) -> np.ndarray:
    lay = circuit._layout(layout)
    if lay.dim > cap:
        raise LayoutError(f"layout dimension {lay.dim} exceeds oracle cap {cap}")
    return circuit.apply_array(np.eye(lay.dim, dtype=complex), lay)


def apply_instruction(state: StateVector, op: GateInstruction) -> StateVector:
    op.validate(state.layout)
    Circuit([op]).apply(state)
    return state


def measure_qubit(state: StateVector, q: int, rng: np.random.Generator, reset: bool = False) -> int:
    """Projective Z measurement with collapse; ``reset`` re-prepares |0>."""
    lay = state.layout
    t = state.data.reshape(lay.dims)
    ax = lay.qubit_axis(q)
    p1 = float(np.sum(np.abs(np.take(t, 1, axis=ax)) ** 2))
    bit = int(rng.random() < p1)
    keep = np.take(t, bit, axis=ax)
    new = np.zeros_like(t)
    idx = [slice(None)] * t.ndim
    idx[ax] = 0 if reset else bit
    new[tuple(idx)] = keep
    state.data = new.reshape(-1)
    state.normalize()
    return bit


def generator_unitary(G: np.ndarray) -> np.ndarray:
    """exp(−iG) for Hermitian G (oracle helper)."""
    return expm_hermitian(G)
