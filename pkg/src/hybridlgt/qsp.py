"""Quantum signal processing for ground-state filtering of a time-evolution oracle.

Conventions. The signal operator is W(x) = exp(i arccos(x) X) and the phase
operator is S(phi) = exp(i phi Z); the sequence is
U = S(phi_0) prod_k W(x) S(phi_k). Phases are symmetric and solved so that
Re <0|U|0> equals a real target polynomial of definite parity. The real part is
realized in the circuit by a selector ancilla that averages the sequence with
its complex-conjugate sequence, so the successful branch applies exactly
P(cos(H~/2)) with H~ = pi/2 + (pi/2 - eta) H / ||H||.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy.optimize import least_squares
from scipy.special import erf, erfinv


class QSPError(RuntimeError):
    """Infeasible band, non-convergent phase solve, or exhausted repetitions."""


# ----------------------------------------------------------------------------
# plan
# ----------------------------------------------------------------------------

def rescale_spectrum(E: np.ndarray | float, norm: float, eta: float) -> np.ndarray | float:
    """H~ = pi/2 + (pi/2 - eta) E / ||H||, mapping [-||H||, ||H||] into [eta, pi - eta]."""
    return math.pi / 2 + (math.pi / 2 - eta) * np.asarray(E) / norm


def overlap_error_budget(infidelity: float, gamma: float) -> float:
    """eps' = sqrt(eps) gamma / sqrt(1 - gamma^2)."""
    if not 0 < gamma < 1:
        raise QSPError("gamma must lie in (0, 1)")
    return math.sqrt(infidelity) * gamma / math.sqrt(1 - gamma * gamma)


@dataclass(frozen=True)
class Band:
    sigma_minus: float
    sigma_plus: float
    sigma_min: float
    sigma_max: float

    @classmethod
    def from_plan(cls, mu: float, gap: float, eta: float) -> "Band":
        return cls(math.cos((mu + gap / 2) / 2), math.cos((mu - gap / 2) / 2),
                   math.cos((math.pi - eta) / 2), math.cos(eta / 2))

    @property
    def width(self) -> float:
        return self.sigma_plus - self.sigma_minus


@dataclass
class QspPlan:
    eta: float
    norm: float
    gap: float
    mu: float
    infidelity: float
    gamma: float
    eps_poly: float
    degree: int = 0
    coeffs: np.ndarray = field(default_factory=lambda: np.zeros(1), repr=False)
    phases: np.ndarray = field(default_factory=lambda: np.zeros(1), repr=False)

    @property
    def band(self) -> Band:
        return Band.from_plan(self.mu, self.gap, self.eta)

    def to_json(self) -> str:
        d = {k: v for k, v in asdict(self).items() if k not in ("coeffs", "phases")}
        d["coeffs"] = [float(c) for c in self.coeffs]
        d["phases"] = [float(p) for p in self.phases]
        return json.dumps(d)


def make_plan(E0: float, E1: float, norm: float, eta: float = 0.05, infidelity: float = 2e-2,
              gamma: float = 0.36, gap: float | None = None) -> QspPlan:
    """Plan from sector energies: mu is the midpoint of the rescaled E0 and E1.

    ``gap`` defaults to the rescaled exact gap; ``gamma`` enters only through the
    polynomial error budget eps'.
    """
    t0, t1 = rescale_spectrum(E0, norm, eta), rescale_spectrum(E1, norm, eta)
    g = float(t1 - t0) if gap is None else gap
    return QspPlan(eta, norm, g, float((t0 + t1) / 2), infidelity, gamma,
                   overlap_error_budget(infidelity, gamma))


# ----------------------------------------------------------------------------
# step polynomial
# ----------------------------------------------------------------------------

def _smooth_step(band: Band, eps: float, edge: float):
    """Even erf-smoothed step: ~1 for |x| >= sigma_plus, ~0 for |x| <= sigma_minus.

    ``edge`` is the smoothing error allowed at the band edges; it sets the erf slope.
    """
    xs = 0.5 * (band.sigma_plus + band.sigma_minus)
    k = erfinv(1 - edge) / (band.width / 2)
    scale = 1 - eps / 4

    def f(x):
        x = np.asarray(x, float)
        return scale * (1 + 0.5 * (erf(k * (x - xs)) - erf(k * (x + xs))))
    return f


def check_band(coeffs: np.ndarray, band: Band, eps: float, grid: int = 2001) -> dict[str, float]:
    """Worst violations of the three band constraints on a uniform grid."""
    x = np.linspace(-1, 1, grid)
    p = cheb.chebval(x, coeffs)
    hi = (x >= band.sigma_plus) & (x <= band.sigma_max)
    lo = (x >= band.sigma_min) & (x <= band.sigma_minus)
    xh = np.linspace(band.sigma_plus, band.sigma_max, grid)
    xl = np.linspace(band.sigma_min, band.sigma_minus, grid)
    return {
        "pass_band": float(max(np.abs(cheb.chebval(xh, coeffs) - 1).max(),
                               np.abs(p[hi] - 1).max() if hi.any() else 0.0)),
        "stop_band": float(max(np.abs(cheb.chebval(xl, coeffs)).max(),
                               np.abs(p[lo]).max() if lo.any() else 0.0)),
        "sup": float(np.abs(p).max()),
    }


def step_polynomial(gap: float, mu: float, eps: float, eta: float = 0.05,
                    max_degree: int = 400) -> tuple[np.ndarray, int]:
    """Lowest even degree Chebyshev truncation of a smoothed step meeting the band constraints.

    Returns Chebyshev coefficients (odd entries exactly zero) and the degree.
    """
    band = Band.from_plan(mu, gap, eta)
    if band.sigma_plus <= band.sigma_minus:
        raise QSPError("infeasible band: sigma_plus <= sigma_minus")
    if band.sigma_minus <= band.sigma_min or band.sigma_plus >= band.sigma_max:
        raise QSPError("transition band leaves the rescaled spectrum window")
    # slope candidates from steep to gentle; gentler steps truncate at lower degree
    series = []
    for edge in eps * np.array([0.25, 0.5, 0.75, 1.0, 1.25]):
        full = cheb.chebinterpolate(_smooth_step(band, eps, edge), max(2 * max_degree, 200))
        full[1::2] = 0.0
        series.append(full)
    for d in range(2, max_degree + 1, 2):
        for full in series:
            c = full[:d + 1].copy()
            v = check_band(c, band, eps)
            if v["pass_band"] <= eps and v["stop_band"] <= eps and v["sup"] <= 1.0:
                return c, d
    raise QSPError(f"no polynomial of degree <= {max_degree} meets the band constraints")


# ----------------------------------------------------------------------------
# phases
# ----------------------------------------------------------------------------

def qsp_unitaries(phases: Sequence[float], x: np.ndarray) -> np.ndarray:
    """U(x) = S(phi_0) prod_k W(x) S(phi_k) for every x (shape (len(x), 2, 2))."""
    x = np.atleast_1d(np.asarray(x, float))
    s = np.sqrt(np.clip(1 - x * x, 0.0, None))
    W = np.zeros((x.size, 2, 2), complex)
    W[:, 0, 0] = W[:, 1, 1] = x
    W[:, 0, 1] = W[:, 1, 0] = 1j * s

    def S(p):
        return np.diag([np.exp(1j * p), np.exp(-1j * p)])

    U = np.broadcast_to(S(phases[0]), (x.size, 2, 2)).copy()
    for p in phases[1:]:
        U = U @ W @ S(p)
    return U


def qsp_block(phases: Sequence[float], x: np.ndarray) -> np.ndarray:
    """<0|U^phi(x)|0>."""
    return qsp_unitaries(phases, x)[:, 0, 0]


def conjugate_phases(phases: Sequence[float]) -> tuple[np.ndarray, complex]:
    """Phases and global factor g with g <0|U^{phi'}|0> = conj(<0|U^phi|0>).

    conj(W) = Z W Z and Z = -i exp(i pi/2 Z), so every interior phase shifts by pi
    and the outer two by pi/2 after negation.
    """
    p = -np.asarray(phases, float)
    d = len(p) - 1
    if d == 0:
        return p, 1.0
    p[0] += math.pi / 2
    p[-1] += math.pi / 2
    p[1:-1] += math.pi
    return p, (-1.0) ** d


def _symmetric_full(half: np.ndarray, d: int) -> np.ndarray:
    if d % 2 == 0:
        return np.concatenate([half, half[-2::-1]])
    return np.concatenate([half, half[::-1]])


@dataclass
class PhaseResult:
    phases: np.ndarray
    residual: float
    iterations: int


def qsp_phases(coeffs: Sequence[float], tol: float = 1e-8, max_nfev: int = 2000) -> PhaseResult:
    """Symmetric phases with Re <0|U^phi|0> = P for the Chebyshev series ``coeffs``.

    Least squares on the positive Chebyshev nodes, started from
    (pi/4, 0, ..., 0, pi/4). Raises QSPError if the residual (max over a check
    grid) exceeds ``tol``.
    """
    c = np.trim_zeros(np.asarray(coeffs, float), "b")
    d = max(len(c) - 1, 0)
    if d == 0:
        # constant polynomials need d=0: Re e^{i phi} = c0
        if abs(c[0] if c.size else 0.0) > 1:
            raise QSPError("constant exceeds 1")
        return PhaseResult(np.array([math.acos(c[0] if c.size else 0.0)]), 0.0, 0)
    parity = d % 2
    odd_c = c[1 - parity::2]
    if np.abs(odd_c).max(initial=0.0) > 1e-10:
        raise QSPError("target polynomial lacks definite parity")
    n_half = (d + 2) // 2
    nodes = np.cos((2 * np.arange(1, n_half + 1) - 1) * math.pi / (4 * n_half))
    target = cheb.chebval(nodes, c)
    grid = np.linspace(-1, 1, 1001)
    ref = cheb.chebval(grid, c)

    def resid(h):
        return qsp_block(_symmetric_full(h, d), nodes).real - target

    best = None
    for start in ("quarter", "zero"):
        x0 = np.zeros(n_half)
        if start == "quarter":
            x0[0] = math.pi / 4
        sol = least_squares(resid, x0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15,
                            max_nfev=max_nfev * n_half)
        ph = _symmetric_full(sol.x, d)
        res = float(np.abs(qsp_block(ph, grid).real - ref).max())
        if best is None or res < best[1]:
            best = (ph, res, int(sol.nfev))
        if res <= tol * 1e-2:
            break
    ph, res, nfev = best
    if res > tol:
        raise QSPError(f"phase solve did not converge: residual {res:.3e}")
    return PhaseResult(ph, res, nfev)


def build_plan(E0: float, E1: float, norm: float, eta: float = 0.05, infidelity: float = 2e-2,
               gamma: float = 0.36, gap: float | None = None) -> QspPlan:
    plan = make_plan(E0, E1, norm, eta, infidelity, gamma, gap)
    plan.coeffs, plan.degree = step_polynomial(plan.gap, plan.mu, plan.eps_poly, eta)
    plan.phases = qsp_phases(plan.coeffs).phases
    return plan


# ----------------------------------------------------------------------------
# QET ground-state preparation
# ----------------------------------------------------------------------------

@dataclass
class QetResult:
    state: np.ndarray | None
    success: bool
    fidelity: float
    repetitions: int
    success_probability: float


def qet_filter_amplitudes(plan: QspPlan, eigenvalues: np.ndarray) -> np.ndarray:
    """Amplitude on the accepted branch per eigenvector of H.

    The QSP ancilla sees the controlled pair e^{-/+ i H~/2}, i.e. the signal
    exp(i theta X) with x = cos(theta) = cos(H~/2) in the W frame. The selector
    ancilla, prepared and read in |+>, averages the sequence with its conjugate.
    """
    x = np.cos(rescale_spectrum(eigenvalues, plan.norm, plan.eta) / 2)
    p = qsp_block(plan.phases, x)
    ph_c, g = conjugate_phases(plan.phases)
    pc = g * qsp_block(ph_c, x)
    return 0.5 * (p + pc)


def repetitions_for_failure(theta: float, p: float) -> int:
    """N = ceil(log(theta) / log(1 - p)) attempts give failure probability <= theta."""
    if not (0 < p <= 1 and 0 < theta < 1):
        raise QSPError("need 0 < p <= 1 and 0 < theta < 1")
    if p == 1:
        return 1
    return math.ceil(math.log(theta) / math.log(1 - p))


def qet_ground_state(H: np.ndarray, phi: np.ndarray, plan: QspPlan, max_repetitions: int = 100,
                     rng: np.random.Generator | None = None, ground: np.ndarray | None = None
                     ) -> QetResult:
    """Repeat the filter circuit until the ancillas herald success.

    Controlled e^{+/- i H~} is built from the exact eigendecomposition. ``ground``
    is the reference ground state used for the reported fidelity (defaults to the
    lowest eigenvector with support on ``phi``).
    """
    w, V = np.linalg.eigh((H + H.conj().T) / 2)
    c = V.conj().T @ phi
    amp = qet_filter_amplitudes(plan, w)
    out = V @ (amp * c)
    p_succ = float(np.vdot(out, out).real)
    if ground is None:
        support = np.abs(c) > 1e-10
        ground = V[:, np.argmax(support)]
    rng = rng if rng is not None else np.random.default_rng(0)
    for k in range(1, max_repetitions + 1):
        if rng.random() < p_succ:
            st = out / math.sqrt(p_succ)
            return QetResult(st, True, float(abs(np.vdot(ground, st)) ** 2), k, p_succ)
    raise QSPError(f"no success in {max_repetitions} repetitions (p = {p_succ:.3g})")


def qsp_success_bound(eps: float, gamma: float) -> float:
    """Worst-case accepted norm (1 - eps')^2 gamma^2 + (1 - gamma^2) eps'^2 (an upper estimate)."""
    return (1 - eps) ** 2 * gamma ** 2 + (1 - gamma ** 2) * eps ** 2


# ----------------------------------------------------------------------------
# time-to-solution comparison
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class CurvePoint:
    method: str
    error: float
    time_to_solution: float
    budget: int


def qsp_curve(p_success: float, degree: int, query_time: float, max_shots: int = 200) -> list[CurvePoint]:
    """Failure probability (1 - p)^N against N x (degree x query time)."""
    depth = degree * query_time
    return [CurvePoint("qsp", (1 - p_success) ** n, n * depth, n) for n in range(1, max_shots + 1)]


def vqe_curve(infidelities: Sequence[float], shots: Sequence[int], circuit_time: float) -> list[CurvePoint]:
    """Best-so-far infidelity against cumulative shots x circuit depth."""
    out, best, used = [], math.inf, 0
    for k, (e, s) in enumerate(zip(infidelities, shots)):
        used += int(s)
        if e < best:
            best = float(e)
            out.append(CurvePoint("vqe", best, used * circuit_time, k + 1))
    return out


def is_monotone_decreasing(points: Sequence[CurvePoint]) -> bool:
    errs = [p.error for p in points]
    times = [p.time_to_solution for p in points]
    return all(b <= a for a, b in zip(errs, errs[1:])) and all(b >= a for a, b in zip(times, times[1:]))


def ground_state_instance(L: int = 3, layers: int = 4):
    """Bosonic Z2 chain at unit filling used for the QSP versus VQE comparison."""
    from . import models as M
    from . import vqe as V
    return V.AnsatzSpec("z2", layers, M.Z2Params(L=L))


def plan_for_spec(spec, eta: float = 0.05, infidelity: float = 2e-2, gamma: float | None = None) -> QspPlan:
    """Plan from the sector spectrum.

    ``gamma`` defaults to the start-state fidelity |<E0|phi>|^2, the quantity the
    reference overlap value 0.36 for this instance refers to.
    """
    w = spec.sector_spectrum()
    _, g = spec.exact_ground()
    if gamma is None:
        gamma = float(abs(np.vdot(g, spec.initial_state().data)) ** 2)
    return build_plan(float(w[0]), float(w[1]), float(np.abs(w).max()), eta, infidelity, gamma)


def qsp_vs_vqe_curve(spec, trace, plan: QspPlan | None = None, max_shots: int = 200) -> dict[str, list[CurvePoint]]:
    """Error against time to solution for QET filtering and for a recorded SPSA run.

    QSP error is the probability that all N attempts fail; one attempt costs
    ``degree`` oracle queries, each priced as one first-order Trotter step at
    dt = 1/||H||. VQE error is the best-so-far infidelity of the trace's angles;
    an iteration costs two energy evaluations over all measurement groups.
    """
    from . import measurement as MS
    from . import trotter as TR
    from . import vqe as V
    plan = plan if plan is not None else plan_for_spec(spec)
    _, g = spec.exact_ground()
    phi = spec.initial_state().data
    w, Vh = np.linalg.eigh(spec.hamiltonian)
    out = Vh @ (qet_filter_amplitudes(plan, w) * (Vh.conj().T @ phi))
    p = float(np.vdot(out, out).real)
    query = TR.z2_step_circuit(spec.params, 1.0 / plan.norm).depth_time
    q = qsp_curve(p, plan.degree, query, max_shots)
    n_groups = len(MS.z2_measurement_groups(spec.params, spec.layout))
    cfg_shots = [2 * r.shots * n_groups for r in trace.rows]
    infid = [1 - abs(np.vdot(g, V.prepare(spec, r.theta).data)) ** 2 for r in trace.rows]
    circuit_time = V.ansatz_circuit(spec, trace.rows[0].theta).depth_time if trace.rows else 0.0
    return {"qsp": q, "vqe": vqe_curve(infid, cfg_shots, circuit_time)}


def curves_to_csv(curves: dict[str, list[CurvePoint]], path) -> None:
    import csv
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "budget", "time_to_solution", "error"])
        for pts in curves.values():
            for p in pts:
                w.writerow([p.method, p.budget, p.time_to_solution, p.error])
