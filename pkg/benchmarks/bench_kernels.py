"""Compiled against numpy fallback: local-gate application and a full Trotter run.

Usage:  python3 benchmarks/bench_kernels.py [--repeat 5] [--csv out.csv]

Both backends run the same inputs; the script checks that their outputs agree
before reporting timings.
"""

from __future__ import annotations

import argparse
import csv
import sys
import timeit

import numpy as np

from hybridlgt import hilbert as h
from hybridlgt import kernels
from hybridlgt import models as M
from hybridlgt import trotter as TR
from hybridlgt import vqe as V


def _random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def local_cases(rng):
    """(label, dims, axes, matrix): two-mode, mode-qubit and three-axis gates."""
    cases = []
    for nmax, n_modes in ((4, 4), (8, 3), (16, 2)):
        dims = (nmax + 1,) * n_modes + (2, 2)
        cases.append((f"BS-like {nmax + 1}^{n_modes}x4", dims, (0, 1),
                      _random_unitary((nmax + 1) ** 2, rng)))
        cases.append((f"CR-like {nmax + 1}^{n_modes}x4", dims, (n_modes - 1, n_modes),
                      _random_unitary(2 * (nmax + 1), rng)))
    dims = (5, 5, 5, 2, 2, 2)
    cases.append(("3-axis 5x5x2", dims, (0, 1, 3), _random_unitary(50, rng)))
    return cases


def trotter_case():
    spec = V.AnsatzSpec("z2", 1, M.Z2Params(L=5, g=0.0, U=0.0, N=1), ([0, 0, 1, 0, 0], "++--"))
    plan = TR.z2_plan(spec.params, 8.5, 85, 1)
    psi = spec.initial_state()
    return lambda: TR.evolve(psi.copy(), plan)[0].data


def bench(repeat: int):
    rng = np.random.default_rng(0)
    backends = kernels.available_backends()
    rows = []
    for label, dims, axes, mat in local_cases(rng):
        vec = rng.normal(size=int(np.prod(dims))) + 1j * rng.normal(size=int(np.prod(dims)))
        vec /= np.linalg.norm(vec)
        outs, times = {}, {}
        for b in backends:
            kernels.use_backend(b)
            outs[b] = kernels.apply_local(vec.copy(), dims, mat, axes)
            times[b] = min(timeit.repeat(lambda: kernels.apply_local(vec.copy(), dims, mat, axes),
                                         number=20, repeat=repeat)) / 20
        rows.append((label, int(np.prod(dims)), times, _agree(outs)))
    run = trotter_case()
    outs, times = {}, {}
    for b in backends:
        kernels.use_backend(b)
        outs[b] = run()
        times[b] = min(timeit.repeat(run, number=1, repeat=repeat))
    rows.append(("Z2 L=5, 85 Trotter steps", outs[backends[0]].size, times, _agree(outs)))
    kernels.use_backend(backends[-1])
    return backends, rows


def _agree(outs) -> float:
    vals = list(outs.values())
    return max(float(np.max(np.abs(v - vals[0]))) for v in vals)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--csv", default=None, help="write results as CSV (seconds)")
    args = ap.parse_args(argv)
    backends, rows = bench(args.repeat)
    if "cython" not in backends:
        print("compiled kernels not built; timing the fallback only", file=sys.stderr)
    head = f"{'case':28s} {'dim':>7s} " + " ".join(f"{b + ' [ms]':>13s}" for b in backends)
    if len(backends) > 1:
        head += f" {'speedup':>8s}"
    print(head + f" {'max |diff|':>11s}")
    for label, dim, t, diff in rows:
        line = f"{label:28s} {dim:7d} " + " ".join(f"{1e3 * t[b]:13.3f}" for b in backends)
        if len(backends) > 1:
            line += f" {t['python'] / t['cython']:8.2f}"
        print(line + f" {diff:11.2e}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["case", "dim"] + [f"{b}_s" for b in backends] + ["max_abs_diff"])
            for label, dim, t, diff in rows:
                w.writerow([label, dim] + [repr(t[b]) for b in backends] + [repr(diff)])
    bad = [r for r in rows if r[3] > 1e-12]
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
