"""Closed-form entangling-gate counts: Fock-binary qubit compilation versus hybrid oscillator-qubit.

Qubit-side counts are CNOTs, hybrid-side counts are conditional parities (CPi);
single-qubit gates and unconditional beamsplitters are treated as free.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

HYBRID_CPI = {"z2": 2, "u1": 8, "plaquette": 1152}
DEFAULT_NEWTON = 2


def _check_n(n: int) -> int:
    if int(n) != n or n < 1:
        raise ValueError(f"register width must be an integer >= 1, got {n}")
    return int(n)


def register_width(cutoff: int) -> int:
    """n = ceil(log2(cutoff + 1)), at least 1."""
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    return max(1, math.ceil(math.log2(cutoff + 1)))


def sqrt_count(n: int, m: int = DEFAULT_NEWTON) -> int:
    """CNOTs for a square root of an n-bit register via m Newton iterations.

    m = 0 is accepted and yields the iteration-free part (126 n^2 + 96 n).
    """
    n = _check_n(n)
    if m < 0:
        raise ValueError("m must be >= 0")
    return (270 * m + 126) * n * n + (228 * m + 96) * n - 12 * m


def transfer_count(n: int) -> int:
    """Amplitude-transfer stage N_tr = 23n - 5."""
    return 23 * _check_n(n) - 5


def multiply_count(n: int) -> int:
    """Product of two n-bit registers N_x = 9n^2 + 6n."""
    n = _check_n(n)
    return 9 * n * n + 6 * n


def controlled_rotation_count(n: int) -> int:
    """Two CNOTs per bit of the 2n-bit square root: N_cR = 4n."""
    return 4 * _check_n(n)


def fock_binary_bs_components(n: int, m: int = DEFAULT_NEWTON) -> dict[str, int]:
    n = _check_n(n)
    return {"transfer": transfer_count(n), "multiply": multiply_count(n),
            "sqrt": sqrt_count(2 * n, m), "rotation": controlled_rotation_count(n)}


def fock_binary_bs_count(n: int, m: int = DEFAULT_NEWTON, conditional: bool = False) -> int:
    """Beamsplitter on two n-bit Fock-binary registers, four Hamiltonian parts.

    N_BS = 4 (2 N_tr + N_x + N_SQRT(2n) + N_cR); at m = 2 this is
    4 (2673 n^2 + 1160 n - 34). The qubit-conditional version costs three times as much.
    """
    c = fock_binary_bs_components(n, m)
    total = 4 * (2 * c["transfer"] + c["multiply"] + c["sqrt"] + c["rotation"])
    return 3 * total if conditional else total


def fock_binary_bs_closed_form(n: int) -> int:
    n = _check_n(n)
    return 4 * (2673 * n * n + 1160 * n - 34)


def z2_cnot_count(n: int, m: int = DEFAULT_NEWTON) -> int:
    """One Trotter step of the bosonic Z2 chain with two matter sites: one conditional beamsplitter."""
    return fock_binary_bs_count(n, m, conditional=True)


def schwinger_cnot_count(n: int) -> int:
    """One Trotter step of the Schwinger model on qubits: 9n^2 - 7n + 34."""
    n = _check_n(n)
    return 9 * n * n - 7 * n + 34


def hybrid_counts(model: str) -> int:
    """CPi per Trotter step (z2, u1) or per plaquette exponential; cutoff independent."""
    try:
        return HYBRID_CPI[model]
    except KeyError:
        raise ValueError(f"unknown model {model!r}; expected one of {sorted(HYBRID_CPI)}") from None


def qubit_count(model: str, cutoff: int, m: int = DEFAULT_NEWTON) -> int:
    n = register_width(cutoff)
    if model == "z2":
        return z2_cnot_count(n, m)
    if model == "u1":
        return schwinger_cnot_count(n)
    raise ValueError(f"no qubit-side count for model {model!r}")


def loglog_slope(ns: Sequence[int], counts: Sequence[int]) -> float:
    """Least-squares slope of log(count) against log(n)."""
    return float(np.polyfit(np.log(ns), np.log(counts), 1)[0])


@dataclass
class CostReport:
    model: str
    cutoff: int
    newton: int = DEFAULT_NEWTON
    n: int = field(init=False)
    qubit_cnot: int = field(init=False)
    hybrid_cpi: int = field(init=False)

    def __post_init__(self):
        self.n = register_width(self.cutoff)
        self.qubit_cnot = qubit_count(self.model, self.cutoff, self.newton)
        self.hybrid_cpi = hybrid_counts(self.model)

    @property
    def ratio(self) -> float:
        return self.qubit_cnot / self.hybrid_cpi


@dataclass(frozen=True)
class FidelityRow:
    model: str
    cutoff: int
    qubit_count: int
    hybrid_count: int
    f: float
    F_qubit: float
    F_hybrid: float


def circuit_fidelity(f: float, count: int) -> float:
    """F = f^N for N entangling gates of fidelity f."""
    if not 0 <= f <= 1:
        raise ValueError("gate fidelity must lie in [0, 1]")
    return float(f) ** int(count)


def fidelity_curves(fidelities: Iterable[float], cutoffs: Iterable[int],
                    models: Sequence[str] = ("z2", "u1"), m: int = DEFAULT_NEWTON) -> list[FidelityRow]:
    rows = []
    fs = list(fidelities)
    for model in models:
        for c in cutoffs:
            nq, nh = qubit_count(model, c, m), hybrid_counts(model)
            for f in fs:
                rows.append(FidelityRow(model, int(c), nq, nh, float(f),
                                        circuit_fidelity(f, nq), circuit_fidelity(f, nh)))
    return rows


FIDELITY_COLUMNS = ("model", "cutoff", "qubit_count", "hybrid_count", "f", "F_qubit", "F_hybrid")


def write_fidelity_csv(rows: Sequence[FidelityRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FIDELITY_COLUMNS)
        for r in rows:
            w.writerow([r.model, r.cutoff, r.qubit_count, r.hybrid_count, repr(r.f),
                        repr(r.F_qubit), repr(r.F_hybrid)])
