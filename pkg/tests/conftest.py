"""Shared fixtures. Expensive optimizations run once per session."""

import numpy as np
import pytest

from hybridlgt import models as M
from hybridlgt import vqe as V


@pytest.fixture(scope="session")
def z2_3site_spec():
    return V.AnsatzSpec("z2", 4, M.Z2Params(L=3))


@pytest.fixture(scope="session")
def z2_3site_theta(z2_3site_spec):
    """Noiseless exact-objective optimum of the 3-site, 4-layer Z2 ansatz."""
    tr = V.optimize(z2_3site_spec, V.OptimizerConfig(mode="deterministic", restarts=1, seed=0))
    return np.asarray(tr.theta)


@pytest.fixture(scope="session")
def z2_3site_spsa_trace(z2_3site_spec):
    """A short shot-based SPSA run for the time-to-solution comparison."""
    cfg = V.OptimizerConfig(mode="spsa", max_iter=300, seed=0, restarts=1, shots0=10)
    return V.optimize(z2_3site_spec, cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE: list[str] = []


@pytest.fixture
def report():
    """Record one acceptance PASS/FAIL line; all lines print in the terminal summary."""
    def _report(n: int, ok: bool, detail: str) -> None:
        _ACCEPTANCE.append(f"ACCEPTANCE {n:2d} {'PASS' if ok else 'FAIL'}  {detail}")
    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
